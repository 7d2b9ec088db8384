"""Flat config grammar, datum/path builders, experiment assembly."""
import numpy as np
import pytest

from rough_scl.config import (
    CONFIG_KEYS,
    build_datum,
    build_experiment,
    build_path,
    config_text,
    load_config,
    parse_config_text,
)
from rough_scl.solver import Grid1D


class TestParse:
    def test_defaults(self):
        cfg = load_config(None)
        assert set(cfg) == set(CONFIG_KEYS)
        assert cfg["flux"] == "burgers"
        assert cfg["n_cells"] == 400
        assert isinstance(cfg["horizon"], float)

    def test_values_comments_and_types(self):
        cfg = parse_config_text(
            """
            # a comment
            n_cells = 128   # trailing comment
            horizon = 0.5
            flux = burgers;cubic
            """
        )
        assert cfg == {"n_cells": 128, "horizon": 0.5, "flux": "burgers;cubic"}

    def test_unknown_key_with_line_number(self):
        with pytest.raises(ValueError, match="line 2.*n_cols"):
            parse_config_text("n_cells = 4\nn_cols = 7\n")

    def test_bad_value(self):
        with pytest.raises(ValueError, match="line 1.*n_cells"):
            parse_config_text("n_cells = many\n")

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config_text("n_cells 4\n")

    def test_file_then_overrides(self, tmp_path):
        f = tmp_path / "c.txt"
        f.write_text("n_cells = 64\nseed = 3\n")
        cfg = load_config(str(f), {"seed": 9, "horizon": None})
        assert cfg["n_cells"] == 64
        assert cfg["seed"] == 9  # override wins
        assert cfg["horizon"] == 1.0  # None override ignored

    def test_unknown_override(self):
        with pytest.raises(ValueError, match="override"):
            load_config(None, {"n_cols": 1})

    def test_text_round_trip(self):
        cfg = load_config(None, {"n_cells": 37, "flux": "cubic"})
        again = parse_config_text(config_text(cfg))
        assert again == cfg


class TestDatumBuilders:
    grid = Grid1D(-1.0, 1.0, 8, "periodic")

    def test_riemann(self):
        u = build_datum("riemann:1,0", self.grid)
        assert np.array_equal(u, np.where(self.grid.centers < 0.0, 1.0, 0.0))
        u = build_datum("riemann:2,-1,0.5", self.grid)
        assert np.array_equal(u, np.where(self.grid.centers < 0.5, 2.0, -1.0))

    def test_bump(self):
        u = build_datum("bump:0,0.5,1", self.grid)
        assert u.max() <= 1.0
        assert u[0] == 0.0 and u[-1] == 0.0
        assert u[np.abs(self.grid.centers) < 0.4].min() > 0.0

    def test_sign_step(self):
        u = build_datum("sign-step", self.grid)
        assert set(np.unique(u)) == {-1.0, 1.0}

    def test_file_round_trip(self, tmp_path):
        f = tmp_path / "u.csv"
        u_ref = np.linspace(-1.0, 1.0, 8)
        f.write_text("x,u\n" + "".join(f"{x},{u}\n" for x, u in zip(self.grid.centers, u_ref)))
        u = build_datum(f"file:{f}", self.grid)
        assert np.allclose(u, u_ref)
        bad = Grid1D(-1.0, 1.0, 9, "periodic")
        with pytest.raises(ValueError, match="rows"):
            build_datum(f"file:{f}", bad)

    def test_unknown(self):
        with pytest.raises(ValueError, match="datum spec"):
            build_datum("tophat:1", self.grid)
        with pytest.raises(ValueError, match="riemann"):
            build_datum("riemann:1", self.grid)


class TestPathBuilders:
    def test_brownian(self):
        p = build_path("brownian:4", 7, 2.0, 3)
        assert p.n_segments == 4
        assert p.n_channels == 3
        assert p.horizon == 2.0
        q = build_path("brownian:4", 7, 2.0, 3)
        assert np.array_equal(p.values, q.values)

    def test_named_single_channel(self):
        tent = build_path("tent", 0, 2.0, 1)
        assert tent.eval(1.0)[0] == pytest.approx(1.0)
        assert tent.eval(2.0)[0] == pytest.approx(0.0)
        ident = build_path("identity", 0, 1.5, 1)
        assert ident.eval(1.5)[0] == pytest.approx(1.5)
        mono = build_path("monomial:2,8", 0, 1.0, 1)
        assert mono.eval(0.5)[0] == pytest.approx(0.25)
        with pytest.raises(ValueError, match="single-channel"):
            build_path("tent", 0, 1.0, 2)

    def test_file(self, tmp_path):
        f = tmp_path / "w.csv"
        f.write_text("t,w1\n0.0,0.0\n1.0,0.5\n")
        p = build_path(f"file:{f}", 0, 1.0, 1)
        assert p.eval(1.0)[0] == pytest.approx(0.5)
        with pytest.raises(ValueError, match="channels"):
            build_path(f"file:{f}", 0, 1.0, 2)

    def test_unknown(self):
        with pytest.raises(ValueError, match="path spec"):
            build_path("ou:1", 0, 1.0, 1)


class TestExperiment:
    def test_build(self):
        cfg = load_config(None, {"flux": "burgers;cubic", "channels": 0, "n_cells": 32})
        exp = build_experiment(cfg)
        assert exp.flux.n_channels == 2
        assert exp.grid.n_cells == 32
        assert exp.path().n_channels == 2  # channels=0 follows the flux
        assert exp.outputs[0] == 0.0 and exp.outputs[-1] == exp.horizon
        assert exp.datum().shape == (32,)
        assert exp.datum("riemann:0,1").max() == 1.0

    def test_channel_override(self):
        cfg = load_config(None, {"channels": 3})
        exp = build_experiment(cfg)
        assert exp.path().n_channels == 3
