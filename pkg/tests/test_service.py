"""HTTP service endpoints: payloads, consistency with the core, error codes."""

import numpy as np
import pytest

from cqedkit import spectra
from cqedkit.qdyn import SystemParams

pytest.importorskip("fastapi")
from fastapi.testclient import TestClient  # noqa: E402

from cqedkit.service import create_app  # noqa: E402


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


PARAMS = {"g": 4.9, "kappa": 49.7, "gamma_rad": 1.36}

DERIVE_REQUEST = {
    "tau_on_ns": 0.194, "tau_on_sigma_ns": 0.008,
    "tau_off_ns": 1.84, "tau_off_sigma_ns": 0.04,
    "xi_max": 0.325, "lifetime_ratio": 9.5, "lifetime_ratio_sigma": 0.6,
    "g_ghz": 4.9, "g_sigma_ghz": 0.3,
    "kappa_ghz": 49.7, "kappa_sigma_ghz": 2.0,
    "gamma_ghz": 1.36, "gamma_sigma_ghz": 0.06,
    "wavelength_nm": 737.0, "q_factor": 8300.0, "mode_volume": 1.8,
    "linewidth_mhz": 304.0,
}


class TestMeta:
    def test_health(self, client):
        assert client.get("/health").json() == {"status": "ok"}

    def test_version(self, client):
        body = client.get("/version").json()
        assert set(body) == {"package", "format"}


class TestDerive:
    def test_report_quantities(self, client):
        body = client.post("/derive", json=DERIVE_REQUEST).json()
        by_name = {q["name"]: q for q in body["quantities"]}
        assert by_name["cooperativity"]["value"] == pytest.approx(1.421, abs=1e-3)
        assert by_name["beta_percent"]["value"] == pytest.approx(89.46, abs=0.01)
        assert by_name["purcell_min"]["value"] == pytest.approx(26.15, abs=0.01)
        assert by_name["purcell_min"]["sigma"] == pytest.approx(1.85, abs=0.01)
        assert by_name["strong_coupling_n"]["value"] == 7
        assert by_name["purcell_theory"]["value"] == pytest.approx(350.4, abs=0.1)

    def test_optional_inputs_omitted(self, client):
        request = {k: v for k, v in DERIVE_REQUEST.items()
                   if k not in ("q_factor", "mode_volume", "wavelength_nm",
                                "linewidth_mhz")}
        body = client.post("/derive", json=request).json()
        names = {q["name"] for q in body["quantities"]}
        assert "purcell_theory" not in names
        assert "q_from_kappa" not in names
        assert "fourier_ratio" not in names

    def test_validation_error_is_422(self, client):
        bad = dict(DERIVE_REQUEST, tau_on_ns=-1.0)
        assert client.post("/derive", json=bad).status_code == 422


class TestSpectrum:
    def test_matches_core(self, client):
        grid = np.linspace(-60, 60, 41)
        resp = client.post("/spectrum", json={"params": PARAMS,
                                              "grid": grid.tolist()})
        values = np.array(resp.json()["values"])
        expected = spectra.dit_transmission(
            SystemParams(**PARAMS), grid).values
        np.testing.assert_allclose(values, expected, rtol=1e-12)

    def test_bad_grid_is_400(self, client):
        resp = client.post("/spectrum", json={"params": PARAMS,
                                              "grid": [1.0, 0.0]})
        assert resp.status_code == 400
        assert resp.json()["detail"]["code"] == "invalid_input"


class TestDecay:
    REQUEST = {
        "config": {"n_max": 1},
        "params": {"g": 1.0, "kappa": 50.0, "gamma_rad": 0.01},
        "t_final_ns": 2.0, "dt_ns": 0.05,
    }

    def test_population_trace(self, client):
        body = client.post("/decay", json=self.REQUEST).json()
        assert body["kind"] == "population"
        assert len(body["values"]) == 41
        assert body["values"][0] == pytest.approx(1.0)

    def test_counts_deterministic_per_seed(self, client):
        request = dict(self.REQUEST, kind="counts", peak_counts=5000, seed=3)
        a = client.post("/decay", json=request).json()
        b = client.post("/decay", json=request).json()
        assert a["values"] == b["values"]
        c = client.post("/decay", json=dict(request, seed=4)).json()
        assert c["values"] != a["values"]

    def test_drive_rejected(self, client):
        request = {"config": {"n_max": 1},
                   "params": dict(PARAMS, omega_drive=0.5),
                   "t_final_ns": 1.0, "dt_ns": 0.1}
        resp = client.post("/decay", json=request)
        assert resp.status_code == 400


class TestTuningMap:
    def test_rows(self, client):
        request = {
            "siv": {"transition_freqs": [207.5, 52.5, -102.5, -207.5],
                    "ground_splitting": 155.0, "branching_xi_max": 0.325},
            "kappa_ghz": 49.7,
            "f0_per_line": [8.0, 41.4, 12.0, 6.0],
            "grid": [52.5],
        }
        body = client.post("/tuning-map", json=request).json()
        by_line = {r["line"]: r["intensity_rel"] for r in body["rows"]}
        assert by_line["B"] == pytest.approx(42.4)


class TestFit:
    def test_round_trip(self, client):
        x = np.linspace(0, 1.2, 61)
        y = 3.0 * np.exp(-x / 0.194)
        request = {
            "kind": "exp_decay",
            "fixed": {"t0": 0.0, "offset": 0.0},
            "free": [{"name": "tau", "init": 0.3, "lower": 0.0},
                     {"name": "amplitude", "init": 2.0, "lower": 0.0}],
            "x": x.tolist(), "y": y.tolist(),
        }
        body = client.post("/fit", json=request).json()
        assert body["converged"]
        params = {p["name"]: p for p in body["params"]}
        assert params["tau"]["value"] == pytest.approx(0.194, rel=1e-8)
        assert len(body["covariance"]) == 2

    def test_unidentifiable_sigma_is_null(self, client):
        request = {
            "kind": "power_broadening",
            "free": [{"name": "linewidth0", "init": 300.0, "lower": 0.0},
                     {"name": "p_sat", "init": 5.0, "lower": 0.0}],
            "x": [0.0, 1.0, 2.0, 4.0], "y": [304.0, 304.0, 304.0, 304.0],
        }
        body = client.post("/fit", json=request).json()
        params = {p["name"]: p for p in body["params"]}
        assert params["p_sat"]["sigma"] is None
        assert body["unidentifiable"] == ["p_sat"]

    def test_degenerate_fit_is_409(self, client):
        x = np.linspace(-5, 5, 21)
        request = {
            "kind": "lorentzian",
            "fixed": {"amplitude": 0.0, "offset": 0.0},
            "free": [{"name": "x0", "init": 0.0},
                     {"name": "fwhm", "init": 1.0}],
            "x": x.tolist(), "y": [0.0] * 21,
        }
        resp = client.post("/fit", json=request)
        assert resp.status_code == 409
        assert resp.json()["detail"]["code"] == "fit_degenerate"


class TestG2:
    def test_blockade_curve(self, client):
        request = {
            "config": {"n_max": 3},
            "params": {"g": 1.0, "kappa": 20.0, "gamma_rad": 0.2,
                       "omega_drive": 0.02},
            "tau_grid": [0.0, 2.0, 30.0],
        }
        body = client.post("/g2", json=request).json()
        assert body["g2"][0] < 0.1
        assert body["g2"][-1] == pytest.approx(1.0, abs=1e-3)

    def test_undefined_correlation_is_409(self, client):
        request = {
            "config": {"n_max": 2},
            "params": {"g": 0.0, "kappa": 1.0, "gamma_rad": 0.1,
                       "omega_drive": 1e-5, "delta_c": 1e4},
            "tau_grid": [0.0],
        }
        resp = client.post("/g2", json=request)
        assert resp.status_code == 409
        assert resp.json()["detail"]["code"] == "solver_failure"


class TestStreakBin:
    CONTENT = ("# rows=3 cols=3 t0_ns=0 dt_ns=0.05"
               " lambda0_nm=736.4 dlambda_nm=0.05\n"
               "1 5 1\n1 3 1\n1 2 1\n")

    def test_bins_window(self, client):
        request = {"content": self.CONTENT, "lambda_min_nm": 736.44,
                   "lambda_max_nm": 736.46, "filename": "demo.txt"}
        body = client.post("/streak-bin", json=request).json()
        assert body["values"] == [5.0, 3.0, 2.0]
        assert body["kind"] == "counts"

    def test_parse_error_names_file(self, client):
        request = {"content": "garbage", "lambda_min_nm": 736.0,
                   "lambda_max_nm": 737.0, "filename": "demo.txt"}
        resp = client.post("/streak-bin", json=request)
        assert resp.status_code == 400
        assert "demo.txt" in resp.json()["detail"]["message"]
