import json
import math
import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinstat.dataset import BinningSpec, ColumnSchema, Role
from clinstat.errors import ArtifactError, SchemaMismatchWarning
from clinstat.logit import DesignTerm
from clinstat.report import (SECTION_ORDER, Cell, ModelArtifact, ReportDocument, fmt3, fmt_p, fmt_pct, load_model,
                             make_section, render_report, save_model, schema_fingerprint, write_report)
from clinstat.rules import MiningConfig

SCHEMA = (ColumnSchema("x", Role.CONTINUOUS), ColumnSchema("t", Role.TARGET))


def artifact(coefs=(0.1, -2.5)):
    terms = [DesignTerm("(Intercept)", None, "intercept"), DesignTerm("x", "x", "continuous")]
    return ModelArtifact(schema_fingerprint(SCHEMA), terms, list(coefs), [0.3, 0.01], 250.25, 180.125, 220, 6,
                         True, [BinningSpec("x", 2, (0.0, 0.5, 1.0))], MiningConfig(), {"seeds": {"partition": 7}})


def bits(values):
    return [struct.pack("<d", v) for v in values]


class TestModelFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        art = artifact((1 / 3, -math.pi * 1e-17))
        save_model(art, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json", schema=SCHEMA)
        assert bits(back.coefficients) == bits(art.coefficients)
        assert back == art

    @settings(max_examples=100, deadline=None)
    @given(coefs=st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=2, max_size=2))
    def test_any_float_survives(self, coefs, tmp_path_factory):
        path = tmp_path_factory.mktemp("m") / "m.json"
        save_model(artifact(coefs), path)
        assert bits(load_model(path).coefficients) == bits(coefs)

    def test_failed_write_leaves_old_file(self, tmp_path, monkeypatch):
        path = tmp_path / "m.json"
        save_model(artifact(), path)
        before = path.read_bytes()

        def boom(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(ArtifactError, match="disk full"):
            save_model(artifact((5.0, 5.0)), path)
        assert path.read_bytes() == before
        assert sorted(p.name for p in tmp_path.iterdir()) == ["m.json"]

    def test_truncated_file_reports_byte_offset(self, tmp_path):
        path = tmp_path / "m.json"
        save_model(artifact(), path)
        path.write_bytes(path.read_bytes()[:100])
        with pytest.raises(ArtifactError, match=r"byte \d+"):
            load_model(path)

    def test_not_a_model(self, tmp_path):
        (tmp_path / "m.json").write_text("[1, 2]")
        with pytest.raises(ArtifactError, match="format_version"):
            load_model(tmp_path / "m.json")

    def test_unsupported_version(self, tmp_path):
        data = artifact().to_dict()
        data["format_version"] = 99
        (tmp_path / "m.json").write_text(json.dumps(data))
        with pytest.raises(ArtifactError, match="99"):
            load_model(tmp_path / "m.json")

    def test_length_mismatch(self, tmp_path):
        data = artifact().to_dict()
        data["coefficients"] = [1.0]
        (tmp_path / "m.json").write_text(json.dumps(data))
        with pytest.raises(ArtifactError):
            load_model(tmp_path / "m.json")

    def test_schema_mismatch_warns_or_raises(self, tmp_path):
        save_model(artifact(), tmp_path / "m.json")
        other = (ColumnSchema("x", Role.FLAG), ColumnSchema("t", Role.TARGET))
        with pytest.warns(SchemaMismatchWarning):
            load_model(tmp_path / "m.json", schema=other)
        with pytest.raises(ArtifactError, match="different schema"):
            load_model(tmp_path / "m.json", schema=other, strict=True)

    def test_fingerprint_depends_on_roles_and_levels(self):
        base = schema_fingerprint(SCHEMA)
        assert base == schema_fingerprint(tuple(SCHEMA))
        assert base != schema_fingerprint((ColumnSchema("x", Role.ORDINAL), SCHEMA[1]))
        assert base != schema_fingerprint((ColumnSchema("x", Role.ORDINAL, ("a", "b")), SCHEMA[1]))


class TestFormatting:
    @pytest.mark.parametrize("value,text", [(0.612, "0.612"), (0.0004, "0.000"), (0.00069, "0.001"),
                                            (1.0, "1.000"), (float("nan"), "")])
    def test_p_values(self, value, text):
        assert fmt_p(value) == text

    def test_percent_and_three_decimals(self):
        assert fmt_pct(72.2727) == "72.27%"
        assert fmt3(-0.9581) == "-0.958"
        assert fmt3(float("nan")) == ""

    def test_cell_keeps_full_precision(self):
        c = make_section("omnibus", "t", ["a"], [[1 / 3]]).rows[0][0]
        assert c.value == 1 / 3 and c.text == "0.333"
        assert Cell(math.inf, "inf").to_json() == {"value": None, "text": "inf"}


def _doc():
    sections = [make_section(name, name.replace("_", " ").title(), ["k", "v"], [["a", 1.25], ["b", 2]])
                for name in reversed(SECTION_ORDER)]
    return ReportDocument(tuple(sections), {"tool_version": "test"})


class TestReportDocument:
    def test_sections_follow_canonical_order(self):
        assert [s.name for s in _doc().sections] == list(SECTION_ORDER)

    def test_unknown_section(self):
        with pytest.raises(ValueError):
            ReportDocument((make_section("misc", "Misc", ["a"], []),))

    @pytest.mark.parametrize("fmt", ["text", "json", "csv"])
    def test_rendering_is_deterministic(self, fmt):
        assert render_report(_doc(), fmt) == render_report(_doc(), fmt)

    def test_json_keeps_values(self):
        data = json.loads(render_report(_doc(), "json"))
        assert list(data["sections"]) == list(SECTION_ORDER)
        assert data["sections"]["omnibus"]["rows"][0][1] == {"value": 1.25, "text": "1.250"}

    def test_text_layout(self):
        text = render_report(_doc(), "text").decode()
        assert "Omnibus\n=======\nk      v\n-  -----\na  1.250\nb      2\n" in text

    def test_empty_section_marker(self):
        doc = ReportDocument((make_section("top_rules", "Top", ["a"], []),
                              make_section("omnibus", "Omni", ["a"], [], notes=["nothing"])))
        text = render_report(doc).decode()
        assert "Omni\n====\n  nothing" in text and "Top\n===\n(empty)" in text

    def test_csv_has_section_markers(self):
        lines = render_report(_doc(), "csv").decode().splitlines()
        assert lines[0] == "# partition_summary,Partition Summary"
        assert lines[1] == "k,v"

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render_report(_doc(), "xml")

    def test_write_report(self, tmp_path):
        write_report(_doc(), tmp_path / "r.txt")
        assert (tmp_path / "r.txt").read_bytes() == render_report(_doc())

    def test_numpy_scalars_render(self):
        section = make_section("omnibus", "t", ["a"], [[np.float64(0.5)]])
        assert section.rows[0][0].text == "0.500"
