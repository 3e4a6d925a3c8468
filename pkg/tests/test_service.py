import math

import pytest
from fastapi.testclient import TestClient

from coclab.service.app import create_app
from coclab.service import handlers
from coclab.service import models as m

CAT = {"kind": "linear_toral", "l11": 2, "l12": 1, "l21": 1, "l22": 1}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestEstimateEndpoint:
    def test_matches_direct_handler_call(self, client):
        payload = {
            "base": CAT,
            "cocycle": {"kind": "derivative"},
            "estimate": {"n_steps": 2000, "n_orbits": 3, "seed": 1, "measure": "lebesgue"},
        }
        over_http = client.post("/estimate", json=payload)
        assert over_http.status_code == 200
        direct = handlers.run_estimate(m.EstimateRequest.model_validate(payload))
        assert over_http.json()["lambda_bar"] == direct.lambda_bar
        assert len(over_http.json()["orbits"]) == 3

    def test_cat_oracle_over_http(self, client):
        payload = {
            "base": CAT,
            "cocycle": {"kind": "derivative"},
            "estimate": {"n_steps": 5000, "n_orbits": 2, "seed": 0},
        }
        got = client.post("/estimate", json=payload).json()["lambda_bar"]
        assert got == pytest.approx(math.log((3 + math.sqrt(5)) / 2), abs=1e-6)

    def test_single_orbit_measure(self, client):
        payload = {
            "base": CAT,
            "cocycle": {"kind": "constant", "v11": 2.0, "v22": 0.5},
            "estimate": {"n_steps": 500, "measure": "point:0.3,0.4"},
        }
        body = client.post("/estimate", json=payload).json()
        assert body["ci95"] is None
        assert body["lambda_bar"] == pytest.approx(math.log(2.0), abs=1e-9)

    def test_nested_cocycle_spec(self, client):
        """A rotation field wrapped around a Schrodinger cocycle."""
        payload = {
            "base": CAT,
            "cocycle": {
                "kind": "rotated",
                "angle0": 0.4,
                "angle_amp": 0.2,
                "base": {"kind": "schrodinger", "energy": 3.0},
            },
            "estimate": {"n_steps": 1000, "n_orbits": 2, "seed": 1},
        }
        reply = client.post("/estimate", json=payload)
        assert reply.status_code == 200
        assert reply.json()["lambda_bar"] >= 0.0

    def test_doubly_nested_wrapper_rejected(self, client):
        payload = {
            "base": CAT,
            "cocycle": {
                "kind": "rotated",
                "base": {"kind": "rotated", "base": {"kind": "constant"}},
            },
        }
        assert client.post("/estimate", json=payload).status_code == 422


class TestClassifyEndpoint:
    def test_uniformly_hyperbolic(self, client):
        payload = {
            "base": CAT,
            "cocycle": {"kind": "constant", "v11": 2.0, "v22": 0.5},
            "estimate": {"n_steps": 1000, "n_orbits": 3},
        }
        body = client.post("/classify", json=payload).json()
        assert body["verdict"] == "uniformly_hyperbolic"
        assert body["cone_margin"] > 0.0

    def test_trivial(self, client):
        payload = {
            "base": CAT,
            "cocycle": {"kind": "constant"},
            "estimate": {"n_steps": 1000, "n_orbits": 3},
        }
        body = client.post("/classify", json=payload).json()
        assert body["verdict"] == "trivial_spectrum"
        assert body["lambda_bound"] is not None


class TestScanEndpoint:
    def test_schrodinger_scan(self, client):
        payload = {
            "family": "schrodinger_energy",
            "start": 2.5,
            "stop": 3.5,
            "steps": 2,
            "base": {"kind": "rotation", "alpha": 0.5, "beta": 0.30902},
            "estimate": {"n_steps": 2000, "n_orbits": 2, "seed": 1},
        }
        rows = client.post("/scan", json=payload).json()["rows"]
        assert len(rows) == 2
        assert rows[0]["param"] == 2.5
        assert rows[0]["lambda_bar"] == pytest.approx(math.log(2.0), abs=2e-3)


class TestPerturbEndpoint:
    def test_probe_mode(self, client):
        payload = {
            "mode": "probe",
            "base": CAT,
            "cocycle": {"kind": "constant", "v11": 2.0, "v22": 0.5},
            "epsilon": 0.01,
            "trials": 10,
            "seed": 4,
            "delta": 0.01,
            "estimate": {"n_steps": 1000, "n_orbits": 2, "seed": 2},
            "profile_steps": 1000,
        }
        body = client.post("/perturb", json=payload).json()
        assert body["mode"] == "probe"
        assert body["max_uplift"] is not None and body["max_uplift"] >= 0.0

    def test_raise_mode_trail(self, client):
        payload = {
            "mode": "raise",
            "base": CAT,
            "cocycle": {"kind": "constant", "v12": 1.0},
            "epsilon": 0.4,
            "trials": 8,
            "seed": 4,
            "estimate": {"n_steps": 1500, "n_orbits": 2, "seed": 2},
            "profile_orbits": 2,
            "profile_steps": 1000,
        }
        body = client.post("/perturb", json=payload).json()
        assert body["lambda_after"] >= body["lambda_before"]
        assert len(body["trail"]) == body["trials_run"]

    def test_precondition_maps_to_422(self, client):
        payload = {
            "mode": "raise",
            "base": CAT,
            "cocycle": {"kind": "constant", "v11": 2.0, "v22": 0.5},
            "epsilon": 0.1,
            "trials": 5,
            "estimate": {"n_steps": 1000, "n_orbits": 2},
        }
        reply = client.post("/perturb", json=payload)
        assert reply.status_code == 422
        assert reply.json()["error"] == "SearchPreconditionError"


class TestConjugacyEndpoint:
    def test_small_field(self, client):
        payload = {
            "base": CAT,
            "eps": 0.005,
            "resolution": 64,
            "tol": 0.01,
            "include_field": True,
        }
        body = client.post("/conjugacy", json=payload).json()
        assert body["residual"] <= 0.01
        assert len(body["field"]) == 64 * 64
        assert body["max_displacement"] > 0.0

    def test_field_omitted_by_default(self, client):
        payload = {"base": CAT, "eps": 0.0, "resolution": 64, "tol": 1e-9}
        body = client.post("/conjugacy", json=payload).json()
        assert body["field"] is None
        assert body["residual"] == 0.0
        assert body["gamma_degenerate"] is True

    def test_nonlinear_base_rejected(self, client):
        payload = {
            "base": {"kind": "standard_map", "K": 0.5},
            "eps": 0.01,
            "resolution": 64,
            "tol": 0.01,
        }
        assert client.post("/conjugacy", json=payload).status_code == 422


class TestErrorMapping:
    def test_domain_error_is_422_payload(self, client):
        bad = {"base": {"kind": "linear_toral", "l11": 2, "l12": 0, "l21": 0, "l22": 2},
               "cocycle": {"kind": "derivative"}}
        reply = client.post("/estimate", json=bad)
        assert reply.status_code == 422
        assert reply.json()["error"] == "InvalidParameterError"

    def test_unknown_field_forbidden(self, client):
        bad = {"base": dict(CAT, bogus=1), "cocycle": {"kind": "derivative"}}
        reply = client.post("/estimate", json=bad)
        assert reply.status_code == 422

    def test_malformed_measure_is_422(self, client):
        bad = {
            "base": CAT,
            "cocycle": {"kind": "derivative"},
            "estimate": {"n_steps": 500, "measure": "bogus"},
        }
        reply = client.post("/estimate", json=bad)
        assert reply.status_code == 422

    def test_health(self, client):
        assert client.get("/health").json()["status"] == "ok"
