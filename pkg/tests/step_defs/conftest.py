"""Step definitions shared by every feature file."""

from __future__ import annotations

from pytest_bdd import given, parsers, then, when

from clampbm.data import generate_synthetic
from tests.conftest import SMALL_SPEC, Workspace

# --- Given ------------------------------------------------------------------


@given("an empty workspace")
def empty_workspace(workspace: Workspace) -> Workspace:
    return workspace


@given("a small labelled dataset")
def small_labelled_dataset(workspace: Workspace) -> None:
    workspace.write_dataset(generate_synthetic(SMALL_SPEC))


@given(parsers.parse('a file "{name}" containing:'))
def file_containing(workspace: Workspace, name: str, docstring: str) -> None:
    workspace.write(name, docstring + "\n")


# --- When -------------------------------------------------------------------


@when(parsers.parse('I run "clampbm {args}"'))
def run_clampbm(workspace: Workspace, args: str) -> None:
    workspace.run(args)


# --- Then -------------------------------------------------------------------


@then(parsers.parse("the command exits with code {code:d}"))
def assert_exit_code(workspace: Workspace, code: int) -> None:
    assert workspace.result.exit_code == code, workspace.result.output


@then(parsers.parse('the output contains "{text}"'))
def assert_output_contains(workspace: Workspace, text: str) -> None:
    assert text in workspace.result.output, workspace.result.output


@then(parsers.parse('the output does not contain "{text}"'))
def assert_output_lacks(workspace: Workspace, text: str) -> None:
    assert text not in workspace.result.output, workspace.result.output


@then(parsers.parse('the file "{name}" exists'))
def assert_file_exists(workspace: Workspace, name: str) -> None:
    assert workspace.path(name).is_file()


@then(parsers.parse('the file "{name}" has {count:d} lines'))
def assert_line_count(workspace: Workspace, name: str, count: int) -> None:
    assert len(workspace.read(name).splitlines()) == count


@then(parsers.parse('the files "{first}" and "{second}" are identical'))
def assert_identical(workspace: Workspace, first: str, second: str) -> None:
    assert workspace.read(first) == workspace.read(second)
