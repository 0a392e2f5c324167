import argparse
import csv
import io

import numpy as np
import pytest

from axistokes.bench import (
    RunConfig,
    count_dofs,
    format_csv,
    level_for_dofs,
    run_convergence,
    run_nu_sweep,
    run_quadrature_sweep,
)
from axistokes.cli import _float_list, _variants, build_parser, main


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_identical_configurations_give_identical_csv(tmp_path):
    cfg = RunConfig(case="ex2", variants=("identity", "rt0_axi"), nus=(1e-2,), levels=(2, 4))
    a = format_csv(run_convergence(cfg))
    out = tmp_path / "b.csv"
    run_convergence(RunConfig(case="ex2", variants=("identity", "rt0_axi"), nus=(1e-2,), levels=(2, 4), out=str(out)))
    assert out.read_bytes() == a.encode()
    assert "\r" not in a


def test_convergence_rows_and_rate_columns():
    rows = run_convergence(RunConfig(case="ex2", variants=("bdm1",), nus=(1.0,), levels=(2, 4, 8)))
    assert [r["n"] for r in rows] == [2, 4, 8]
    assert np.isnan(rows[0]["eoc_err_energy"])
    assert rows[2]["eoc_err_energy"] > 0.5
    assert list(rows[0])[:9] == ["case", "variant", "nu", "n", "jitter", "seed", "qorder_a", "qorder_rhs", "qorder_err"]
    assert all(r["div_residual"] <= 1e-9 for r in rows)


def test_single_viscosity_sweep_has_no_slope_column():
    rows = run_nu_sweep(RunConfig(case="ex2", variants=("rt0",), nus=(1e-2,), levels=(3,)))
    assert "slope_err_energy" not in rows[0]
    rows = run_nu_sweep(RunConfig(case="ex2", variants=("rt0",), nus=(1e-1, 1e-2), levels=(3,)))
    assert np.isnan(rows[0]["slope_err_energy"]) and np.isfinite(rows[1]["slope_err_energy"])


def test_quadrature_sweep_tags_rows_by_order():
    rows = run_quadrature_sweep(
        RunConfig(case="ex3", variants=("rt0_axi",), nus=(1.0,), levels=(3,)), qorders=(10, 20)
    )
    assert [r["qorder_rhs"] for r in rows] == [10, 20]


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(variants=("rt1",))
    with pytest.raises(ValueError):
        RunConfig(nus=(0.0,))
    with pytest.raises(KeyError):
        RunConfig(case="ex9")


def test_dof_target_picks_the_closest_level():
    assert count_dofs(2) == 11 + 8
    assert level_for_dofs(22000) == 56
    assert abs(count_dofs(56) - 22000) < abs(count_dofs(55) - 22000)
    assert abs(count_dofs(56) - 22000) < abs(count_dofs(57) - 22000)


def test_decade_ranges():
    assert _float_list("1e0..1e-3") == (1.0, 0.1, 0.01, 0.001)
    assert _float_list("1e-2..1e0") == (0.01, 0.1, 1.0)
    assert _float_list("0.5,2") == (0.5, 2.0)
    with pytest.raises(argparse.ArgumentTypeError):
        _float_list("3..1e-2")


def test_variant_selection():
    assert _variants("all") == ("identity", "rt0", "bdm1", "rt0_axi", "bdm1_axi")
    assert _variants("rt0,bdm1_axi") == ("rt0", "bdm1_axi")
    with pytest.raises(argparse.ArgumentTypeError, match="unknown variant"):
        _variants("rt2")


def test_parser_defaults():
    args = build_parser().parse_args(["nusweep"])
    assert args.dofs == 22000 and len(args.nus) == 9 and args.pi == _variants("all")
    args = build_parser().parse_args(["quadsweep", "--level", "4"])
    assert args.case == "ex3" and args.qorders == (10, 20, 50) and args.level == 4


def test_cli_converge_writes_csv_to_stdout(capsys):
    assert main(["converge", "--case", "ex1", "--pi", "rt0_axi", "--nu", "1", "--levels", "2,4"]) == 0
    rows = parse(capsys.readouterr().out)
    assert len(rows) == 2
    assert float(rows[1]["err_energy"]) <= 1e-8


def test_cli_sweep_writes_file(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["nusweep", "--pi", "identity,bdm1_axi", "--nus", "1e0..1e-2", "--level", "3", "--out", str(out)])
    assert code == 0
    rows = parse(out.read_text())
    assert [r["variant"] for r in rows] == ["identity"] * 3 + ["bdm1_axi"] * 3


def test_cli_property_suite_quick(capsys):
    assert main(["proptest", "--quick"]) == 0
    assert "passed" in capsys.readouterr().out
