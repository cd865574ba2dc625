"""
Pytest configuration file for the exactmeta tests.
"""
import os
import sys

import numpy as np
import pytest

# Add the parent directory to the path so we can import the main module
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from exactmeta.bivariate import DTAData
from exactmeta.univariate import UnivariateData


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    """Run replicate evaluation on one thread unless a test asks otherwise"""
    monkeypatch.setenv("EXACTMETA_THREADS", "1")


@pytest.fixture
def uni_data():
    """Five studies with moderate heterogeneity"""
    return UnivariateData(
        y=np.array([-1.2, -0.4, -0.9, 0.3, -0.6]),
        sigma2=np.array([0.20, 0.35, 0.15, 0.40, 0.25])
    )


@pytest.fixture
def dta_data():
    """Eight diagnostic accuracy studies on the logit scale"""
    from exactmeta.simulate import gen_bivariate
    return gen_bivariate(8, 0.5, 0.4, seed=3).data


@pytest.fixture
def network_model():
    """Eight-trial four-treatment network"""
    from exactmeta.simulate import gen_network
    return gen_network(8, 0.3, seed=1).data


@pytest.fixture
def uni_csv_path(tmp_path):
    """Create a sample univariate CSV file for testing"""
    csv_content = "y,variance\n"
    csv_content += "-1.2,0.20\n"
    csv_content += "-0.4,0.35\n"
    csv_content += "-0.9,0.15\n"
    csv_content += "0.3,0.40\n"

    file_path = tmp_path / "uni.csv"
    with open(file_path, "w") as f:
        f.write(csv_content)

    return str(file_path)


@pytest.fixture
def dta_csv_path(tmp_path):
    """Create a sample 2x2-count diagnostic accuracy CSV file"""
    csv_content = "tp,fp,fn,tn\n"
    csv_content += "45,12,5,88\n"
    csv_content += "30,20,10,140\n"
    csv_content += "60,8,15,70\n"
    csv_content += "22,0,3,51\n"
    csv_content += "38,15,9,102\n"
    csv_content += "51,25,12,160\n"

    file_path = tmp_path / "dta.csv"
    with open(file_path, "w") as f:
        f.write(csv_content)

    return str(file_path)


@pytest.fixture
def nma_csv_path(tmp_path):
    """Create a sample arm-level network CSV file (reference A)"""
    csv_content = "study,treatment,events,n\n"
    csv_content += "s1,A,12,60\ns1,B,18,60\n"
    csv_content += "s2,A,20,100\ns2,C,31,100\n"
    csv_content += "s3,A,9,45\ns3,C,15,45\n"
    csv_content += "s4,A,14,80\ns4,B,19,80\ns4,C,25,80\n"
    csv_content += "s5,B,10,50\ns5,C,13,50\n"
    csv_content += "s6,A,11,70\ns6,B,16,70\n"

    file_path = tmp_path / "nma.csv"
    with open(file_path, "w") as f:
        f.write(csv_content)

    return str(file_path)
