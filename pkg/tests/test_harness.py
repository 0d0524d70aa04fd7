import json

import numpy as np
import pytest

from dcma.cli import main as cli_main
from dcma.config import ConfigError, RunConfig, parse_config_text
from dcma.domain import Box
from dcma.expressions import ExpressionError, compile_expression
from dcma.harness import (
    boundary_adherence_probe,
    compact_inset_box,
    convexity_of_limit_probe,
    run_refinement_study,
)


QUAD_CFG = """
# quadratic problem on the unit box
domain.kind = box
domain.box = [0, 0, 1, 1]
problem.name = quadratic
study.h = [0.25, 0.125]
study.delta = 0.25
scheme.tol_residual = 1e-9
seed = 1
"""


def make_config(tmp_path, text, out=None):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = RunConfig.from_file(path)
    cfg.output_dir = str(out or tmp_path / "out")
    return cfg


class TestExpressions:
    def test_basic(self):
        fn = compile_expression("x*x + 2*y")
        pts = np.array([[1.0, 2.0], [0.5, 0.0]])
        assert np.allclose(fn(pts), [5.0, 0.25])

    def test_functions(self):
        fn = compile_expression("max(abs(x) - 0.3, 0) + exp(y) + sqrt(x + 1)")
        pts = np.array([[0.5, 0.0]])
        assert fn(pts)[0] == pytest.approx(0.2 + 1.0 + np.sqrt(1.5))

    def test_constant_broadcasts(self):
        fn = compile_expression("1")
        assert np.array_equal(fn(np.zeros((5, 2))), np.ones(5))

    def test_rejects_names_and_calls(self):
        with pytest.raises(ExpressionError):
            compile_expression("__import__('os')")
        with pytest.raises(ExpressionError):
            compile_expression("z + 1")
        with pytest.raises(ExpressionError):
            compile_expression("x.real")


class TestConfig:
    def test_parse_lines(self):
        cfg = parse_config_text("a.b = 1\n# comment\nc = [1, 2]\nd = hello\n")
        assert cfg == {"a.b": 1, "c": [1, 2], "d": "hello"}

    def test_bad_line(self):
        with pytest.raises(ConfigError):
            parse_config_text("not a pair\n")

    def test_run_config(self, tmp_path):
        cfg = make_config(tmp_path, QUAD_CFG)
        assert isinstance(cfg.domain, Box)
        assert cfg.h_values == [0.25, 0.125]
        assert cfg.scheme.tol_residual == 1e-9
        assert cfg.problem.exact is not None

    def test_unknown_problem(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, QUAD_CFG.replace("quadratic", "mystery"))

    def test_increasing_h_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, QUAD_CFG.replace("[0.25, 0.125]", "[0.125, 0.25]"))

    def test_delta_without_compact_set_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, QUAD_CFG.replace("study.delta = 0.25", "study.delta = 0.6"))


def test_compact_inset_box():
    box = compact_inset_box(Box(0, 0, 1, 1), 0.25)
    assert box == (0.25, 0.25, 0.75, 0.75)
    from dcma.domain import ConvexPolygon, Disk

    half = (1.0 - 0.3) / np.sqrt(2)
    assert compact_inset_box(Disk(1.0), 0.3) == pytest.approx((-half, -half, half, half))
    poly_box = compact_inset_box(ConvexPolygon(((0, 0), (2, 0), (2, 2), (0, 2))), 0.4)
    poly = ConvexPolygon(((0, 0), (2, 0), (2, 2), (0, 2)))
    for x in (poly_box[0], poly_box[2]):
        for y in (poly_box[1], poly_box[3]):
            assert poly.distance_to_boundary(x, y) >= 0.4 * (1 - 1e-9)


class TestStudy:
    def test_quadratic_study(self, tmp_path):
        cfg = make_config(tmp_path, QUAD_CFG)
        report = run_refinement_study(cfg)
        assert report.passed, report.failures
        for rec in report.records:
            assert rec.error is None
            assert rec.sup_err_all <= 10 * cfg.scheme.tol_residual
            assert rec.barrier_ok
            assert rec.abp_pass
            assert rec.discrete_convex
        # artifacts
        table = (tmp_path / "out" / "table.csv").read_text().splitlines()
        assert table[0].startswith("h,sup_err_K,")
        assert len(table) == 3
        data = json.loads((tmp_path / "out" / "report.json").read_text())
        assert data["passed"] is True
        assert len(data["records"]) == 2

    def test_affine_study_zero_errors(self, tmp_path):
        cfg = make_config(
            tmp_path, QUAD_CFG.replace("quadratic", "affine")
        )
        report = run_refinement_study(cfg)
        assert report.passed
        for rec in report.records:
            assert rec.sup_err_all <= 1e-8
            assert rec.ma_mass == pytest.approx(0.0, abs=1e-10)

    def test_study_continues_after_failure(self, tmp_path):
        # second level has h too large? use an h list where the first level
        # fails lattice construction (h bigger than the domain)
        text = QUAD_CFG.replace("[0.25, 0.125]", "[0.6, 0.25]")
        cfg = make_config(tmp_path, text)
        report = run_refinement_study(cfg)
        assert not report.passed
        assert report.records[0].error is not None
        assert report.records[1].error is None

    def test_order_column(self, tmp_path):
        text = QUAD_CFG.replace("quadratic", "exp").replace(
            "[0.25, 0.125]", "[0.25, 0.125, 0.0625]"
        )
        cfg = make_config(tmp_path, text)
        report = run_refinement_study(cfg)
        assert report.passed, report.failures
        orders = [r.order for r in report.records]
        assert orders[0] is None
        assert orders[1] is not None and orders[1] > 0.5
        assert orders[2] is not None and orders[2] > 0.5

    def test_determinism_modulo_timing(self, tmp_path):
        cfg1 = make_config(tmp_path, QUAD_CFG, out=tmp_path / "o1")
        run_refinement_study(cfg1)
        cfg2 = make_config(tmp_path, QUAD_CFG, out=tmp_path / "o2")
        run_refinement_study(cfg2)

        def strip_timing_csv(path):
            rows = [r.split(",") for r in path.read_text().splitlines()]
            drop = rows[0].index("seconds")
            return [[c for i, c in enumerate(r) if i != drop] for r in rows]

        assert strip_timing_csv(tmp_path / "o1" / "table.csv") == strip_timing_csv(
            tmp_path / "o2" / "table.csv"
        )

        def strip_timing_json(path):
            data = json.loads(path.read_text())
            for rec in data["records"]:
                rec.pop("seconds", None)
            return data

        assert strip_timing_json(tmp_path / "o1" / "report.json") == strip_timing_json(
            tmp_path / "o2" / "report.json"
        )


@pytest.fixture(scope="module")
def exp_study(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("exp")
    text = QUAD_CFG.replace("quadratic", "exp").replace(
        "[0.25, 0.125]", "[0.125, 0.0625]"
    )
    cfg = make_config(tmp, text)
    report = run_refinement_study(cfg, write_outputs=False)
    assert report.passed, report.failures
    return cfg, report


def test_mass_growth_gate():
    from dcma.harness import StudyRecord, _check_mass_growth

    records = [
        StudyRecord(h=0.125, ma_mass=1.0),
        StudyRecord(h=0.0625, ma_mass=1.3),  # 30% growth at h <= 1/16
    ]
    failures = []
    _check_mass_growth(records, failures)
    assert failures and "grew" in failures[0]
    # growth above the coarse cutoff does not trip the gate
    records = [StudyRecord(h=0.5, ma_mass=1.0), StudyRecord(h=0.25, ma_mass=1.3)]
    failures = []
    _check_mass_growth(records, failures)
    assert not failures


class TestProbes:
    def test_boundary_adherence_exp(self, exp_study):
        cfg, report = exp_study
        rows, alphas = boundary_adherence_probe(
            report.solutions, cfg.problem.g, cfg.domain, exact=cfg.problem.exact
        )
        assert rows
        finest = min(r["h"] for r in rows)
        finest_rows = {r["dist"]: r for r in rows if r["h"] == finest}
        assert len(finest_rows) == 3
        # deficits positive near the boundary for the exp problem and the
        # fitted exponent reflects the shrinking envelope gap
        assert alphas[finest] is not None
        assert alphas[finest] >= 0.4

    def test_boundary_adherence_quadratic_interp_scale(self, tmp_path):
        # the discrete solution is nodewise exact, so shell errors reduce to
        # the PL interpolation error of the quadratic, at most h^2/4
        cfg = make_config(tmp_path, QUAD_CFG)
        report = run_refinement_study(cfg, write_outputs=False)
        rows, _ = boundary_adherence_probe(
            report.solutions, cfg.problem.g, cfg.domain, exact=cfg.problem.exact
        )
        for r in rows:
            assert r["shell_sup_err"] <= r["h"] ** 2 / 4 + 1e-7
            assert r["excess"] <= 1e-8  # never above the harmonic barrier

    def test_boundary_adherence_affine_identically_zero(self, tmp_path):
        cfg = make_config(tmp_path, QUAD_CFG.replace("quadratic", "affine"))
        report = run_refinement_study(cfg, write_outputs=False)
        rows, alphas = boundary_adherence_probe(
            report.solutions, cfg.problem.g, cfg.domain, exact=cfg.problem.exact
        )
        for r in rows:
            assert r["deficit"] <= 1e-8
            assert r["excess"] <= 1e-8
            assert r["shell_sup_err"] <= 1e-8
        assert all(a is None for a in alphas.values())  # nothing to fit

    def test_convexity_probe(self, exp_study):
        cfg, report = exp_study
        out = convexity_of_limit_probe(
            report.solutions, compact_inset_box(cfg.domain, cfg.delta), seed=3
        )
        hs = sorted(out, reverse=True)
        v_coarse = out[hs[0]]["max_violation"]
        v_fine = out[hs[1]]["max_violation"]
        assert v_fine <= v_coarse + 1e-12
        for h in hs:
            assert out[h]["max_violation"] <= h


class TestCLI:
    def test_refine_study_cli(self, tmp_path, capsys):
        cfg_path = tmp_path / "quad.cfg"
        cfg_path.write_text(QUAD_CFG)
        code = cli_main(
            ["refine-study", "--config", str(cfg_path), "--out", str(tmp_path / "out")]
        )
        assert code == 0
        assert (tmp_path / "out" / "table.csv").exists()
        assert (tmp_path / "out" / "report.json").exists()

    def test_solve_cli(self, tmp_path):
        cfg_path = tmp_path / "quad.cfg"
        cfg_path.write_text(QUAD_CFG)
        code = cli_main(["solve", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 0
        assert (tmp_path / "o" / "solution.csv").exists()

    def test_measure_cli(self, tmp_path):
        cfg_path = tmp_path / "quad.cfg"
        cfg_path.write_text(QUAD_CFG)
        code = cli_main(["measure", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 0
        data = json.loads((tmp_path / "o" / "mass.json").read_text())
        assert data["total_mass"] > 0

    def test_check_abp_cli(self, tmp_path):
        cfg_path = tmp_path / "quad.cfg"
        cfg_path.write_text(QUAD_CFG)
        code = cli_main(["check-abp", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 0

    def test_envelope_cli(self, tmp_path):
        cfg_path = tmp_path / "quad.cfg"
        cfg_path.write_text(QUAD_CFG)
        code = cli_main(["envelope", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 0
        assert (tmp_path / "o" / "envelope.csv").exists()

    def test_negative_source_exits_2(self, tmp_path):
        bad = QUAD_CFG.replace("problem.name = quadratic", "problem.f = 0 - 1\nproblem.g = x")
        cfg_path = tmp_path / "bad.cfg"
        cfg_path.write_text(bad)
        code = cli_main(["solve", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_unknown_flag_exits_2(self, tmp_path):
        code = cli_main(["solve", "--nope"])
        assert code == 2

    def test_missing_config_exits_2(self, tmp_path):
        code = cli_main(["solve", "--config", str(tmp_path / "none.cfg")])
        assert code == 2

    def test_selftest_cli(self):
        assert cli_main(["selftest", "--seed", "1"]) == 0
