"""Figure-spec parsing, schema enforcement, rendering, and CLI contract."""

import shutil
from pathlib import Path

import pytest

from plots import cli, constants, figspec
from plots import render as prender

FIXTURES = Path(figspec.__file__).parent / "fixtures"


def write(path, text):
    path.write_text(text)
    return path


def make_spec(tmp_path, **overrides):
    base = {
        "kind": "ladder",
        "input": str(FIXTURES / "hitting.csv"),
        "output": str(tmp_path / "out.png"),
        "x": "t",
        "y": "H_logt",
        "se": "SE_logt",
    }
    base.update(overrides)
    text = "\n".join(f"{k} = {v}" for k, v in base.items() if v is not None)
    return write(tmp_path / "fig.spec", text)


class TestSpecParsing:
    def test_loads_and_resolves_relative_input(self, tmp_path):
        shutil.copy(FIXTURES / "hitting.csv", tmp_path / "hitting.csv")
        p = make_spec(tmp_path, input="hitting.csv")
        spec = figspec.load_figure_spec(p)
        assert spec.input == tmp_path / "hitting.csv"
        assert spec.required_columns == ["t", "H_logt", "SE_logt"]

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(figspec.SpecError, match="kind"):
            figspec.load_figure_spec(make_spec(tmp_path, kind="scatter"))

    def test_missing_mandatory_key(self, tmp_path):
        p = write(tmp_path / "f.spec", "kind = ladder\ninput = a.csv\n")
        with pytest.raises(figspec.SpecError, match="output"):
            figspec.load_figure_spec(p)

    def test_unknown_key_rejected(self, tmp_path):
        p = make_spec(tmp_path)
        p.write_text(p.read_text() + "\ncolor = red\n")
        with pytest.raises(figspec.SpecError, match="color"):
            figspec.load_figure_spec(p)

    def test_ratio_band_requires_reference(self, tmp_path):
        with pytest.raises(figspec.SpecError, match="reference"):
            figspec.load_figure_spec(make_spec(tmp_path, kind="ratio-band"))

    def test_named_and_literal_references(self, tmp_path):
        spec = figspec.load_figure_spec(
            make_spec(tmp_path, reference="inverse_local_density_critical")
        )
        assert spec.reference == 3.0
        spec = figspec.load_figure_spec(make_spec(tmp_path, reference="2.5"))
        assert spec.reference == 2.5
        with pytest.raises(figspec.SpecError, match="known names"):
            figspec.load_figure_spec(make_spec(tmp_path, reference="bogus"))

    def test_reference_constant_values(self):
        assert constants.REFERENCE_CONSTANTS["local_density_critical"] == 1 / 3
        assert constants.resolve_reference("unit") == 1.0
        inv = constants.resolve_reference("inverse_escape_probability_heavy07")
        assert inv == pytest.approx(1.0 / 0.5850988563902972)


class TestRendering:
    @pytest.mark.parametrize(
        "name", ["survival-ratio", "hitting-ladder", "conditional-mass", "plateau"]
    )
    def test_shipped_fixture_specs_render(self, name, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        spec = figspec.load_figure_spec(FIXTURES / f"{name}.spec")
        out = prender.render(spec)
        assert out.is_file() and out.stat().st_size > 0

    def test_empty_but_valid_csv_renders_empty_axes(self, tmp_path):
        write(tmp_path / "empty.csv", "t,H,SE,n,H_logt,SE_logt\n")
        p = make_spec(tmp_path, input=str(tmp_path / "empty.csv"))
        out = prender.render(figspec.load_figure_spec(p))
        assert out.is_file() and out.stat().st_size > 0

    def test_schema_mismatch_reports_column_diff(self, tmp_path):
        write(tmp_path / "bad.csv", "time,val\n1,2\n")
        p = make_spec(tmp_path, input=str(tmp_path / "bad.csv"))
        with pytest.raises(prender.SchemaError) as exc:
            prender.render(figspec.load_figure_spec(p))
        assert exc.value.missing == ["H_logt", "SE_logt", "t"]
        assert exc.value.present == ["time", "val"]

    def test_render_is_deterministic(self, tmp_path):
        blobs = []
        for tag in ("a", "b"):
            p = make_spec(tmp_path, output=str(tmp_path / f"{tag}.png"))
            out = prender.render(figspec.load_figure_spec(p))
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_histogram_overlays_exponential(self, tmp_path):
        spec = figspec.load_figure_spec(FIXTURES / "conditional-mass.spec")
        spec.output = tmp_path / "hist.png"
        assert prender.render(spec).is_file()


class TestCLI:
    def test_render_fixture_exits_zero(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["render", str(FIXTURES / "survival-ratio.spec")]) == 0
        assert "wrote" in capsys.readouterr().out

    def test_schema_mismatch_exits_2_with_diff(self, tmp_path, capsys):
        write(tmp_path / "bad.csv", "a,b\n1,2\n")
        p = make_spec(tmp_path, input=str(tmp_path / "bad.csv"))
        assert cli.main(["render", str(p)]) == cli.EXIT_SCHEMA
        err = capsys.readouterr().err
        assert "missing columns" in err and "H_logt" in err

    def test_bad_spec_exits_1(self, tmp_path, capsys):
        p = write(tmp_path / "f.spec", "kind = ladder\n")
        assert cli.main(["render", str(p)]) == cli.EXIT_SPEC
        assert "spec error" in capsys.readouterr().err

    def test_missing_input_csv_exits_1(self, tmp_path, capsys):
        p = make_spec(tmp_path, input=str(tmp_path / "absent.csv"))
        assert cli.main(["render", str(p)]) == cli.EXIT_SPEC
