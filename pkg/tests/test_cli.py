from __future__ import annotations

import io
import json
import sys
from pathlib import Path
from typing import Any

import pytest

from src.app import main
from src.cli import commands
from src.cli.documents import MatrixDocumentError, parse_document, read_document
from src.cli.error_handler import ExitCode, UsageError, VerificationFailed, handle_cli_error
from src.core.canonical import UnclassifiableStructure
from src.core.closure_graph import class_graph, load_graph
from src.services.verification import Check, Status, SuiteReport

_VARIABLES = (
    "CONGRUA_TOL_RANK",
    "CONGRUA_TOL_EIG",
    "CONGRUA_SEED",
    "CONGRUA_TRIALS",
    "CONGRUA_EPSILON",
    "CONGRUA_CONDITION_BOUND",
    "CONGRUA_LOG_LEVEL",
    "CONGRUA_OUTPUT_FORMAT",
)


@pytest.fixture(autouse=True)
def base_env(monkeypatch: pytest.MonkeyPatch) -> None:
    for name in _VARIABLES:
        monkeypatch.delenv(name, raising=False)


def _run(capsys: pytest.CaptureFixture[str], *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _json(capsys: pytest.CaptureFixture[str], *argv: str) -> Any:
    code, out, err = _run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_classify_literal_matrix_as_json(capsys: pytest.CaptureFixture[str]) -> None:
    payload = _json(capsys, "classify", "--json", "[[0,1],[-1,0]]")

    assert payload["class"] == "ii"
    assert payload["codim"] == 3
    assert payload["param"] is None
    assert payload["pattern"] == ["* 0", "* *"]


def test_classify_zero_matrix_file(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    document = tmp_path / "zero3.json"
    document.write_text(json.dumps({"n": 3, "entries": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}))

    payload = _json(capsys, "classify", "--json", str(document))

    assert payload["class"] == "1"
    assert payload["codim"] == 9


def test_classify_text_output(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "classify", "0 1; 0.5 0")

    assert code == 0
    assert out.splitlines()[:3] == ["class: v_lambda", "param: 2", "codim: 1"]
    assert "warnings: none" in out


def test_classify_reads_stdin(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    monkeypatch.setattr(sys, "stdin", io.StringIO("1 0 0\n0 1 0\n0 0 1\n"))

    payload = _json(capsys, "classify", "--json", "-")

    assert payload["class"] == "8"


def test_classify_output_is_byte_identical(capsys: pytest.CaptureFixture[str]) -> None:
    first = _run(capsys, "classify", "--json", "[[0,1,0],[0,0,1],[0.001,0,-0.003]]")
    second = _run(capsys, "classify", "--json", "[[0,1,0],[0,0,1],[0.001,0,-0.003]]")

    assert first[0] == 0
    assert first[1] == second[1]


def test_classify_garbled_file_exits_with_usage_error(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    document = tmp_path / "garbled.json"
    document.write_text("{[not json")

    code, out, err = _run(capsys, "classify", str(document))

    assert code == ExitCode.USAGE
    assert out == ""
    assert err.startswith("congrua: error: invalid JSON")


def test_classify_names_the_bad_entry(capsys: pytest.CaptureFixture[str]) -> None:
    code, _, err = _run(capsys, "classify", '[[0, "x"], [1, 0]]')

    assert code == ExitCode.USAGE
    assert "row 1, column 2" in err


def test_classify_missing_file(capsys: pytest.CaptureFixture[str]) -> None:
    code, _, err = _run(capsys, "classify", "nowhere.json")

    assert code == ExitCode.USAGE
    assert "no such file" in err


def test_classify_unclassifiable_input_exits_with_two(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    def refuse(*_: object) -> None:
        raise UnclassifiableStructure("cosquare spectrum matches no canonical form")

    monkeypatch.setattr(commands, "classify", refuse)

    code, _, err = _run(capsys, "classify", "[[1,0],[0,1]]")

    assert code == ExitCode.UNCLASSIFIABLE
    assert "matches no canonical form" in err


def test_canonical_matrix_text_and_json(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "canonical", "10")
    payload = _json(capsys, "canonical", "v", "--param", "0.5,0", "--json")

    assert code == 0
    assert out.splitlines() == ["0  -1  0", "1  1  0", "0  0  1"]
    assert payload["class"] == "v_lambda"
    assert payload["param"] == [2.0, 0.0]
    assert payload["entries"][1][0] == [2.0, 0.0]


def test_canonical_rejects_parameter_for_fixed_class(capsys: pytest.CaptureFixture[str]) -> None:
    code, _, err = _run(capsys, "canonical", "ii", "--param", "2")

    assert code == ExitCode.USAGE
    assert "takes no parameter" in err


def test_canonical_rejects_excluded_parameter(capsys: pytest.CaptureFixture[str]) -> None:
    code, _, err = _run(capsys, "canonical", "5", "--param=-1,0")

    assert code == ExitCode.USAGE
    assert "excluded" in err


def test_codim_of_tag_and_matrix(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "codim", "ii")
    payload = _json(capsys, "codim", "--json", "[[0,1,0],[0,0,1],[0,0,0]]")

    assert code == 0
    assert out == "3\n"
    assert payload == {"codim": 2, "subject": "matrix"}


def test_pattern_lists_one_based_stars(capsys: pytest.CaptureFixture[str]) -> None:
    payload = _json(capsys, "pattern", "9", "--json")

    assert payload["stars"] == [[3, 1], [3, 3]]
    assert payload["pattern"] == ["0 0 0", "0 0 0", "* 0 *"]


def test_graph_json_round_trips(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "graph", "classes", "--n", "3", "--format", "json")

    graph = load_graph(out)

    assert code == 0
    assert len(graph.vertices) == 12
    assert len(graph.edges) == 17
    assert graph == class_graph(3)


def test_graph_dot_output(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "graph", "bundles", "--n", "2", "--format", "dot")

    assert code == 0
    assert sum("->" in line for line in out.splitlines()) == 5
    assert sum("[label=" in line for line in out.splitlines()) == 5


@pytest.mark.parametrize(
    "argv",
    [
        ("graph", "classes", "--n", "5"),
        ("graph", "vertices", "--n", "2"),
        ("graph", "classes"),
        (),
        ("frobnicate",),
    ],
)
def test_usage_errors_exit_with_one(
    capsys: pytest.CaptureFixture[str], argv: tuple[str, ...]
) -> None:
    code, _, err = _run(capsys, *argv)

    assert code == ExitCode.USAGE
    assert "congrua: error:" in err


def test_reach_up_from_iii(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "reach", "iii", "--direction", "up", "--n", "2")

    assert code == 0
    assert out.splitlines() == ["iii", "iv", "v_lambda", "vi"]


def test_reach_down_from_nine_as_json(capsys: pytest.CaptureFixture[str]) -> None:
    payload = _json(capsys, "reach", "9", "--direction", "down", "--n", "3", "--json")

    assert payload["reach"] == ["1", "2", "3", "4", "5_lambda", "6", "9"]
    assert payload["level"] == "classes"


def test_reach_in_bundle_graph(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "reach", "iv", "--level", "bundles", "--n", "2")

    assert code == 0
    assert out.splitlines() == ["iv", "v&vi"]


def test_reach_unknown_tag_exits_with_one(capsys: pytest.CaptureFixture[str]) -> None:
    code, _, err = _run(capsys, "reach", "13", "--n", "3")

    assert code == ExitCode.USAGE
    assert "13" in err


def test_verify_deformation_passes(capsys: pytest.CaptureFixture[str]) -> None:
    payload = _json(capsys, "verify", "deformation", "--json")

    assert payload["suite"] == "deformation"
    assert payload["violations"] == 0
    assert len(payload["checks"]) == 36


def test_verify_text_summary(capsys: pytest.CaptureFixture[str]) -> None:
    code, out, _ = _run(capsys, "verify", "graphs")

    assert code == 0
    assert out.splitlines()[-1].startswith("suite=graphs")
    assert out.splitlines()[-1].endswith("violations=0")


def test_verify_passes_overrides_to_the_suite(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    seen: dict[str, Any] = {}

    def record(suite: str, config: Any) -> SuiteReport:
        seen.update(suite=suite, trials=config.trials, eps=config.eps, seed=config.rng.seed)
        return SuiteReport(suite, (Check("stub", Status.PASS),))

    monkeypatch.setattr(commands, "run_suite", record)

    code, _, _ = _run(
        capsys, "verify", "montecarlo", "--trials", "100", "--eps", "1e-3", "--seed", "7"
    )

    assert code == 0
    assert seen == {"suite": "montecarlo", "trials": 100, "eps": 1e-3, "seed": 7}


def test_verify_violation_exits_with_three(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    def failing(suite: str, _config: Any) -> SuiteReport:
        return SuiteReport(suite, (Check("broken", Status.FAIL, "observed 7"),))

    monkeypatch.setattr(commands, "run_suite", failing)

    code, out, err = _run(capsys, "verify", "witness", "--json")

    assert code == ExitCode.VIOLATION
    assert json.loads(out)["violations"] == 1
    assert "1 violation" in err


def test_verify_rejects_bad_trials(capsys: pytest.CaptureFixture[str]) -> None:
    code, _, err = _run(capsys, "verify", "witness", "--trials", "0")

    assert code == ExitCode.USAGE
    assert "CONGRUA_TRIALS" in err


def test_environment_selects_json_output(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    monkeypatch.setenv("CONGRUA_OUTPUT_FORMAT", "json")

    payload = _json(capsys, "codim", "12")

    assert payload == {"codim": 1, "subject": "12"}


def test_invalid_environment_exits_with_one(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    monkeypatch.setenv("CONGRUA_TOL_RANK", "tiny")

    code, _, err = _run(capsys, "codim", "ii")

    assert code == ExitCode.USAGE
    assert "CONGRUA_TOL_RANK" in err


def test_tolerance_flags_override_environment(capsys: pytest.CaptureFixture[str]) -> None:
    payload = _json(capsys, "classify", "--json", "--rank-tol", "1e-2", "[[1,0],[0,0.001]]")

    assert payload["class"] == "iii"


def test_handle_cli_error_maps_exceptions(capsys: pytest.CaptureFixture[str]) -> None:
    assert handle_cli_error(UsageError("bad flag")) == ExitCode.USAGE
    assert handle_cli_error(MatrixDocumentError("bad", 2, 1)) == ExitCode.USAGE
    assert handle_cli_error(UnclassifiableStructure("odd")) == ExitCode.UNCLASSIFIABLE
    assert handle_cli_error(VerificationFailed("all", 2)) == ExitCode.VIOLATION
    assert handle_cli_error(RuntimeError("boom")) == ExitCode.USAGE

    err = capsys.readouterr().err
    assert "congrua: error: row 2, column 1: bad" in err


def test_parse_document_accepts_pairs_and_tokens() -> None:
    document = parse_document('{"n": 2, "entries": [[[0, 1], "2-3i"], [1, 0]]}')

    assert document.n == 2
    assert document.entries[0, 0] == 1j
    assert document.entries[0, 1] == 2 - 3j


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("", "empty"),
        ("[[1, 2], [3]]", "row 2"),
        ("[[1]]", "2 or 3 rows"),
        ('{"n": 3, "entries": [[1, 0], [0, 1]]}', "declares n=3"),
        ("[[1, true], [0, 1]]", "row 1, column 2"),
        ("[[1, [0, 1, 2]], [0, 1]]", "[re, im] pair"),
        ("1 nan; 0 1", "not finite"),
    ],
)
def test_parse_document_rejects_bad_input(text: str, message: str) -> None:
    with pytest.raises(MatrixDocumentError, match=message.replace("[", r"\[").replace("]", r"\]")):
        parse_document(text)


def test_read_document_prefers_existing_files(tmp_path: Path) -> None:
    document = tmp_path / "m.txt"
    document.write_text("1, 2\n3, 4\n")

    assert read_document(str(document)).entries[1, 0] == 3
    assert read_document("1 2; 3 4").entries[0, 1] == 2


def test_classify_accepts_very_large_entries(capsys: pytest.CaptureFixture[str]) -> None:
    payload = _json(capsys, "classify", "--json", "1e200 0 0; 0 1e200 0; 0 0 1e200")

    assert payload["class"] == "8"
    assert payload["warnings"] == []
