"""
Tests for CSV ingestion and result serialization
"""
import json

import numpy as np
import pytest

from exactmeta import ingest
from exactmeta.bivariate import ConfidenceRegion
from exactmeta.errors import InputError


def _write(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content)
    return str(path)


def test_read_univariate(uni_csv_path):
    """Test reading y,variance rows"""
    # Call the function
    data = ingest.read_univariate(uni_csv_path)

    # Verify results
    assert data.k == 4
    assert data.y[0] == -1.2
    assert data.sigma2[3] == 0.40


def test_read_univariate_counts(tmp_path):
    """Test two-arm counts are turned into log odds ratios"""
    path = _write(tmp_path, "counts.csv", "events_t,n_t,events_c,n_c\n4,20,8,20\n10,50,12,50\n")

    data = ingest.read_univariate(path)

    assert data.y[0] == pytest.approx(np.log(4 * 12 / (16 * 8)))


def test_read_univariate_reports_line(tmp_path):
    """Test a non-numeric value names its file line"""
    path = _write(tmp_path, "bad.csv", "y,variance\n0.1,0.2\n0.3,abc\n")

    with pytest.raises(InputError, match="line 3"):
        ingest.read_univariate(path)


def test_read_univariate_negative_variance(tmp_path):
    """Test non-positive variances are rejected with their line"""
    path = _write(tmp_path, "bad.csv", "y,variance\n0.1,0.2\n0.3,0.1\n0.2,-1\n")

    with pytest.raises(InputError, match="line 4"):
        ingest.read_univariate(path)


def test_missing_file():
    """Test a missing file is an input error"""
    with pytest.raises(InputError, match="File not found"):
        ingest.read_univariate("/nonexistent/file.csv")


def test_unknown_columns(tmp_path):
    """Test a header matching no schema"""
    path = _write(tmp_path, "bad.csv", "a,b\n1,2\n")

    with pytest.raises(InputError, match="expected columns"):
        ingest.read_dta(path)


def test_read_dta_counts(dta_csv_path):
    """Test 2x2 counts with one zero cell"""
    data = ingest.read_dta(dta_csv_path)

    assert data.k == 6
    assert data.y[0, 0] == pytest.approx(np.log(45 / 5))
    assert data.y[3, 1] == pytest.approx(np.log(51.5 / 0.5))


def test_read_dta_negative_count(tmp_path):
    """Test negative counts are rejected"""
    path = _write(tmp_path, "bad.csv", "tp,fp,fn,tn\n10,2,3,40\n10,-2,3,40\n")

    with pytest.raises(InputError, match="line 3"):
        ingest.read_dta(path)


def test_read_dta_logits(tmp_path):
    """Test precomputed logits are read as they are"""
    path = _write(tmp_path, "dta.csv", "yA,yB,vA,vB\n1.0,-1.0,0.1,0.2\n0.8,-1.2,0.15,0.25\n")

    data = ingest.read_dta(path)

    assert np.allclose(data.y, [[1.0, -1.0], [0.8, -1.2]])
    assert np.allclose(data.s2, [[0.1, 0.2], [0.15, 0.25]])


def test_read_dta_logits_reports_line(tmp_path):
    """Test a non-positive variance in logit rows names its file line"""
    path = _write(tmp_path, "dta.csv", "yA,yB,vA,vB\n1.0,-1.0,0.1,0.2\n0.8,-1.2,0.0,0.25\n")

    with pytest.raises(InputError, match="line 3"):
        ingest.read_dta(path)


def test_read_network_arm_level(nma_csv_path):
    """Test arm-level data with a study lacking the reference needs augmentation"""
    with pytest.raises(InputError, match="lacks the reference arm"):
        ingest.read_network(nma_csv_path)

    # Call the function
    model = ingest.read_network(nma_csv_path, augment=True)

    # Verify results
    assert model.labels == ["A", "B", "C"]
    assert model.p == 2
    assert model.k == 6
    assert model.N == 8


def test_read_network_other_reference(nma_csv_path):
    """Test choosing B as reference moves it to the front of the labels"""
    model = ingest.read_network(nma_csv_path, reference="B", augment=True)

    assert model.labels == ["B", "A", "C"]


def test_read_network_contrast_level(tmp_path):
    """Test ';'-separated contrasts with a shared reference label"""
    path = _write(tmp_path, "contrasts.csv",
                  "study,treatments,y,S\n"
                  "s1,B,0.5,0.4\n"
                  "s2,B;C,0.3;0.9,0.5;0.2;0.2;0.6\n"
                  "s3,C,1.1,0.3\n")

    model = ingest.read_network(path, reference="A")

    assert model.labels == ["A", "B", "C"]
    assert model.N == 4
    assert model.S_blocks[1][0, 1] == 0.2


def test_read_network_contrast_shape_error(tmp_path):
    """Test a covariance with the wrong number of entries names its line"""
    path = _write(tmp_path, "contrasts.csv",
                  "study,treatments,y,S\ns1,B,0.5,0.4\ns2,B;C,0.3;0.9,0.5;0.2\n")

    with pytest.raises(InputError, match="line 3"):
        ingest.read_network(path, reference="A")


def test_write_contrasts_reads_back(tmp_path, nma_csv_path):
    """Test the contrast-level export of a network is readable"""
    model = ingest.read_network(nma_csv_path, augment=True)
    out = str(tmp_path / "out.csv")

    ingest.write_contrasts(model, out)
    again = ingest.read_network(out, reference="A")

    assert again.labels == model.labels
    assert np.array_equal(again.y, model.y)
    assert np.array_equal(again.S, model.S)


def test_region_frame_columns():
    """Test boundary points on both scales"""
    region = ConfidenceRegion(center=np.array([1.0, -1.0]), angles=np.array([0.0, np.pi]),
                              radii_raw=np.array([0.5, 0.5]), radii_smoothed=np.array([0.5, 0.5]),
                              alpha=0.05)

    df = ingest.region_frame(region)

    assert list(df.columns) == ["t", "muA", "muB", "sens", "fpr"]
    assert df["muA"].tolist() == pytest.approx([1.5, 0.5])
    assert df["sens"].iloc[0] == pytest.approx(1 / (1 + np.exp(-1.5)))


def test_dumps_is_deterministic():
    """Test sorted keys and NaN written as null"""
    text = ingest.dumps({"b": np.float64("nan"), "a": np.array([1, 2]), "c": np.bool_(True)})

    assert json.loads(text) == {"a": [1, 2], "b": None, "c": True}
    assert text.index('"a"') < text.index('"b"')


def test_write_output_to_file(tmp_path):
    """Test writing to a path"""
    out = tmp_path / "result.json"

    ingest.write_output("{}\n", str(out))

    assert out.read_text() == "{}\n"


def test_write_univariate_reads_back_exactly(tmp_path):
    """Test a simulated univariate dataset survives a CSV round trip bit for bit"""
    from exactmeta.simulate import gen_univariate

    data = gen_univariate(5, 0.2, seed=3).data
    out = str(tmp_path / "uni.csv")

    # Call the function
    ingest.write_univariate(data, out)
    again = ingest.read_univariate(out)

    # Verify results
    assert np.array_equal(again.y, data.y)
    assert np.array_equal(again.sigma2, data.sigma2)


def test_write_dta_reads_back_exactly(tmp_path):
    """Test a simulated DTA dataset survives a CSV round trip bit for bit"""
    from exactmeta.simulate import gen_bivariate

    data = gen_bivariate(6, 0.5, 0.0, seed=3).data
    out = str(tmp_path / "dta.csv")

    ingest.write_dta(data, out)
    again = ingest.read_dta(out)

    assert np.array_equal(again.y, data.y)
    assert np.array_equal(again.s2, data.s2)
