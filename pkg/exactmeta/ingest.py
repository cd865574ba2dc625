"""
CSV ingestion and result serialization.

Input schemas (detected from the header):
    uni:  y,variance  or  events_t,n_t,events_c,n_c
    dta:  tp,fp,fn,tn  or  yA,yB,vA,vB
    nma:  study,treatment,events,n  (arm level)
          study,treatments,y,S      (contrast level; ';'-separated values,
                                     S flattened row-major)
"""
import json
import logging
import sys
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from exactmeta.bivariate import ConfidenceRegion, DTAData, DTAStudy, transform_to_roc
from exactmeta.errors import InputError
from exactmeta.network import ArmRecord, ContrastStudy, NetworkModel, contrasts_from_arms
from exactmeta.univariate import UnivariateData

logger = logging.getLogger(__name__)

UNI_COLUMNS = ["y", "variance"]
UNI_COUNT_COLUMNS = ["events_t", "n_t", "events_c", "n_c"]
DTA_COUNT_COLUMNS = ["tp", "fp", "fn", "tn"]
DTA_LOGIT_COLUMNS = ["yA", "yB", "vA", "vB"]
NMA_ARM_COLUMNS = ["study", "treatment", "events", "n"]
NMA_CONTRAST_COLUMNS = ["study", "treatments", "y", "S"]
REGION_COLUMNS = ["t", "muA", "muB", "sens", "fpr"]


def _read(path: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except FileNotFoundError as e:
        raise InputError(f"File not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"Cannot parse {path}: {e}") from e
    df.columns = [str(c).strip() for c in df.columns]
    if df.empty:
        raise InputError(f"{path} contains no data rows")
    return df


def _has(df: pd.DataFrame, columns: Sequence[str]) -> bool:
    return all(c in df.columns for c in columns)


def _numeric(df: pd.DataFrame, columns: Sequence[str], path: str) -> Dict[str, np.ndarray]:
    """Columns as floats; errors name the 1-based file line (header is line 1)."""
    values = {}
    for column in columns:
        converted = pd.to_numeric(df[column], errors="coerce")
        bad = np.flatnonzero(converted.isna().to_numpy())
        if bad.size:
            line = int(bad[0]) + 2
            raise InputError(f"{path}, line {line}: column '{column}' is not a number: {df[column].iloc[bad[0]]!r}")
        # float() parsing; exact for repr-written values
        values[column] = df[column].str.strip().astype(float).to_numpy()
    return values


def _row_error(path: str, index: int, error: Exception) -> InputError:
    return InputError(f"{path}, line {index + 2}: {error}")


def read_univariate(path: str) -> UnivariateData:
    """Read y,variance or two-arm event counts."""
    df = _read(path)
    if _has(df, UNI_COLUMNS):
        v = _numeric(df, UNI_COLUMNS, path)
        bad = np.flatnonzero(v["variance"] <= 0)
        if bad.size:
            raise InputError(f"{path}, line {int(bad[0]) + 2}: variance must be positive")
        return UnivariateData(v["y"], v["variance"])
    if _has(df, UNI_COUNT_COLUMNS):
        v = _numeric(df, UNI_COUNT_COLUMNS, path)
        return UnivariateData.from_counts(v["events_t"], v["n_t"], v["events_c"], v["n_c"])
    raise InputError(f"{path}: expected columns {UNI_COLUMNS} or {UNI_COUNT_COLUMNS}, got {list(df.columns)}")


def read_dta(path: str) -> DTAData:
    """Read 2x2 counts (tp,fp,fn,tn) or logit values (yA,yB,vA,vB)."""
    df = _read(path)
    if _has(df, DTA_COUNT_COLUMNS):
        v = _numeric(df, DTA_COUNT_COLUMNS, path)
        for column in DTA_COUNT_COLUMNS:
            bad = np.flatnonzero(v[column] < 0)
            if bad.size:
                raise InputError(f"{path}, line {int(bad[0]) + 2}: '{column}' must be nonnegative")
        return DTAData.from_counts(v["tp"], v["fp"], v["fn"], v["tn"])
    if _has(df, DTA_LOGIT_COLUMNS):
        v = _numeric(df, DTA_LOGIT_COLUMNS, path)
        studies = []
        for i in range(len(df)):
            try:
                studies.append(DTAStudy(v["yA"][i], v["yB"][i], v["vA"][i], v["vB"][i]))
            except InputError as e:
                raise _row_error(path, i, e) from e
        return DTAData.from_studies(studies)
    raise InputError(f"{path}: expected columns {DTA_COUNT_COLUMNS} or {DTA_LOGIT_COLUMNS}, got {list(df.columns)}")


def _split_values(cell: str) -> List[str]:
    return [part.strip() for part in str(cell).split(";") if part.strip()]


def _treatment_labels(names: Iterable[str], reference: Optional[str]) -> List[str]:
    """Reference first, then the remaining labels sorted."""
    names = sorted(set(names))
    if reference is None:
        reference = names[0]
    return [reference] + [n for n in names if n != reference]


def read_network(path: str, augment: bool = False, reference: Optional[str] = None) -> NetworkModel:
    """
    Read arm-level or contrast-level network data.

    Args:
        path: CSV file
        augment: Add the reference pseudo-arm to arm-level studies that lack it
        reference: Reference treatment label (default: first label in sorted
            order for arm-level data, "reference" for contrast-level data)

    Returns:
        NetworkModel: labels[0] is the reference treatment
    """
    df = _read(path)
    if _has(df, NMA_ARM_COLUMNS):
        v = _numeric(df, ["events", "n"], path)
        df["study"] = df["study"].str.strip()
        df["treatment"] = df["treatment"].str.strip()
        labels = _treatment_labels(df["treatment"], reference)
        ids = {name: j for j, name in enumerate(labels)}
        arms = []
        for i, row in enumerate(df.itertuples(index=False)):
            try:
                arms.append(ArmRecord(study_id=row.study, treatment=ids[row.treatment],
                                      events=v["events"][i], n=v["n"][i]))
            except InputError as e:
                raise _row_error(path, i, e) from e
        studies = contrasts_from_arms(arms, augment=augment, reference=0)
        return NetworkModel.from_studies(studies, p=len(labels) - 1, labels=labels)

    if _has(df, NMA_CONTRAST_COLUMNS):
        reference = reference or "reference"
        rows = []
        for i, row in enumerate(df.itertuples(index=False)):
            rows.append((i, str(row.study).strip(), _split_values(row.treatments),
                         _split_values(row.y), _split_values(row.S)))
        labels = _treatment_labels([t for r in rows for t in r[2]] + [reference], reference)
        ids = {name: j for j, name in enumerate(labels)}
        studies = []
        for i, study_id, treatments, y, S in rows:
            try:
                p_i = len(treatments)
                if len(y) != p_i or len(S) != p_i * p_i:
                    raise InputError(f"expected {p_i} contrasts and {p_i * p_i} covariance entries")
                studies.append(ContrastStudy(
                    study_id=study_id,
                    treatments=tuple(ids[t] for t in treatments),
                    y=np.array([float(x) for x in y]),
                    S=np.array([float(x) for x in S]).reshape(p_i, p_i)
                ))
            except (InputError, ValueError) as e:
                raise _row_error(path, i, e) from e
        return NetworkModel.from_studies(studies, p=len(labels) - 1, labels=labels)

    raise InputError(f"{path}: expected columns {NMA_ARM_COLUMNS} or {NMA_CONTRAST_COLUMNS}, got {list(df.columns)}")


def _float_text(values) -> List[str]:
    return [repr(float(v)) for v in values]


def write_univariate(data: UnivariateData, path: str) -> None:
    """y,variance CSV that read_univariate reads back bit for bit."""
    pd.DataFrame({"y": _float_text(data.y), "variance": _float_text(data.sigma2)},
                 columns=UNI_COLUMNS).to_csv(path, index=False)


def write_dta(data: DTAData, path: str) -> None:
    """yA,yB,vA,vB CSV that read_dta reads back bit for bit."""
    pd.DataFrame({
        "yA": _float_text(data.y[:, 0]), "yB": _float_text(data.y[:, 1]),
        "vA": _float_text(data.s2[:, 0]), "vB": _float_text(data.s2[:, 1]),
    }, columns=DTA_LOGIT_COLUMNS).to_csv(path, index=False)


def write_contrasts(model: NetworkModel, path: str) -> None:
    """Contrast-level CSV of a network model built from basis-vector designs."""
    rows = []
    start = 0
    for study_id, size, S in zip(model.study_ids, model.sizes, model.S_blocks):
        X = model.X[start:start + size]
        y = model.y[start:start + size]
        treatments = [model.labels[int(np.argmax(row)) + 1] for row in X]
        rows.append({
            "study": study_id,
            "treatments": ";".join(treatments),
            "y": ";".join(_float_text(y)),
            "S": ";".join(_float_text(S.ravel())),
        })
        start += size
    pd.DataFrame(rows, columns=NMA_CONTRAST_COLUMNS).to_csv(path, index=False)


def region_frame(region: ConfidenceRegion) -> pd.DataFrame:
    """Boundary points on the logit and ROC scales."""
    boundary = region.boundary
    roc = transform_to_roc(boundary)
    return pd.DataFrame({
        "t": region.angles,
        "muA": boundary[:, 0],
        "muB": boundary[:, 1],
        "sens": roc[:, 0],
        "fpr": roc[:, 1],
    }, columns=REGION_COLUMNS)


def dumps(result) -> str:
    """Deterministic JSON text (sorted keys, NaN as null)."""
    return json.dumps(_clean(result), sort_keys=True, indent=2) + "\n"


def _clean(value):
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_output(text: str, out: Optional[str]) -> None:
    """Write to `out`, or to stdout when no path is given."""
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def frame_to_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False)
