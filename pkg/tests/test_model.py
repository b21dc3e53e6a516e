"""Core graph model: mutation preconditions, validation, readiness."""

import pytest

from constellation import (
    CycleIntroduced,
    DuplicateEdge,
    DuplicateId,
    FailureReason,
    ImmutableTask,
    NotFound,
    TaskConstellation,
    TaskStatus,
)
from constellation.model import IllegalTransitionError


def chain(*ids):
    c = TaskConstellation(request="chain")
    for tid in ids:
        c.add_task({"id": tid, "name": tid, "description": tid, "device": "dev"})
    for a, b in zip(ids, ids[1:]):
        c.add_dependency({"id": f"e{a}{b}", "from_task": a, "to_task": b})
    return c


class TestTaskOps:
    def test_add_task_assigns_pending_status(self):
        c = chain("A")
        assert c.tasks["A"].status is TaskStatus.PENDING
        assert c.version == 1

    def test_duplicate_task_id_rejected(self):
        c = chain("A")
        with pytest.raises(DuplicateId):
            c.add_task({"id": "A", "device": "dev"})

    def test_remove_task_drops_incident_edges(self, fig4):
        # C has eAC incoming plus eCD and eCE outgoing; all three must go.
        fig4.remove_task("C")
        assert "C" not in fig4.tasks
        assert set(fig4.edges) == {"eBD", "eDE"}

    def test_remove_non_pending_task_rejected(self):
        c = chain("A")
        c.transition("A", TaskStatus.RUNNING)
        with pytest.raises(ImmutableTask):
            c.remove_task("A")

    def test_update_task_respects_editable_fields(self):
        c = chain("A")
        c.update_task("A", {"description": "new words", "tips": ["hint"]})
        assert c.tasks["A"].description == "new words"
        from constellation.errors import IllegalField

        with pytest.raises(IllegalField):
            c.update_task("A", {"status": "COMPLETED"})

    def test_update_non_pending_task_rejected(self):
        c = chain("A")
        c.transition("A", TaskStatus.RUNNING)
        with pytest.raises(ImmutableTask):
            c.update_task("A", {"description": "too late"})

    def test_missing_task_raises_not_found(self):
        with pytest.raises(NotFound):
            chain("A").task("Z")


class TestEdgeOps:
    def test_cycle_rejected_and_rolled_back(self):
        c = chain("A", "B", "C")
        before = set(c.edges)
        with pytest.raises(CycleIntroduced):
            c.add_dependency({"id": "eCA", "from_task": "C", "to_task": "A"})
        assert set(c.edges) == before

    def test_self_loop_rejected(self):
        c = chain("A")
        with pytest.raises(CycleIntroduced):
            c.add_dependency({"id": "eAA", "from_task": "A", "to_task": "A"})

    def test_parallel_edge_rejected(self):
        c = chain("A", "B")
        with pytest.raises(DuplicateEdge):
            c.add_dependency({"id": "e2", "from_task": "A", "to_task": "B"})

    def test_edge_to_non_pending_target_rejected(self):
        c = chain("A", "B")
        c.transition("B", TaskStatus.RUNNING)
        c2 = chain("A", "B")
        c2.add_task({"id": "C", "device": "dev"})
        c2.transition("B", TaskStatus.RUNNING)
        with pytest.raises(ImmutableTask):
            c2.add_dependency({"id": "eCB", "from_task": "C", "to_task": "B"})

    def test_remove_edge_requires_pending_target(self):
        c = chain("A", "B")
        c.transition("A", TaskStatus.RUNNING)
        c.transition("A", TaskStatus.COMPLETED, result="ok")
        c.transition("B", TaskStatus.RUNNING)
        with pytest.raises(ImmutableTask):
            c.remove_dependency("eAB")


class TestTransitions:
    def test_legal_lifecycle(self):
        c = chain("A")
        c.transition("A", TaskStatus.RUNNING)
        c.transition("A", TaskStatus.COMPLETED, result="done")
        assert c.tasks["A"].result == "done"

    def test_pending_to_failed_allowed(self):
        c = chain("A")
        c.transition("A", TaskStatus.FAILED, failure_reason=FailureReason.TIMEOUT)
        assert c.tasks["A"].failure_reason is FailureReason.TIMEOUT

    @pytest.mark.parametrize(
        "path",
        [
            (TaskStatus.COMPLETED,),
            (TaskStatus.RUNNING, TaskStatus.COMPLETED, TaskStatus.RUNNING),
            (TaskStatus.RUNNING, TaskStatus.FAILED, TaskStatus.COMPLETED),
        ],
    )
    def test_illegal_transitions_rejected(self, path):
        c = chain("A")
        with pytest.raises(IllegalTransitionError):
            for status in path:
                c.transition("A", status, result="x")


class TestValidate:
    def test_clean_graph_reports_nothing(self, fig4):
        assert fig4.validate() == []

    def test_dangling_edge_detected(self):
        c = chain("A", "B")
        del c.tasks["B"]
        kinds = {v.kind for v in c.validate()}
        assert "DanglingEdge" in kinds

    def test_cycle_detected_with_node_listing(self):
        c = chain("A", "B")
        c.edges["eBA"] = c.edges["eAB"].copy()
        c.edges["eBA"].id = "eBA"
        c.edges["eBA"].from_task, c.edges["eBA"].to_task = "B", "A"
        violations = [v for v in c.validate() if v.kind == "CycleIntroduced"]
        assert len(violations) == 1
        assert "A" in violations[0].detail and "B" in violations[0].detail

    def test_result_on_non_terminal_task_detected(self):
        c = chain("A")
        c.tasks["A"].result = "phantom"
        assert any(v.kind == "StatusResult" for v in c.validate())


class TestReadiness:
    def test_fig4_progression(self, fig4):
        assert fig4.ready_tasks() == ["A", "B"]
        fig4.transition("A", TaskStatus.RUNNING)
        fig4.transition("A", TaskStatus.COMPLETED, result="ok")
        assert fig4.ready_tasks() == ["B", "C"]
        for tid in ("B", "C"):
            fig4.transition(tid, TaskStatus.RUNNING)
            fig4.transition(tid, TaskStatus.COMPLETED, result="ok")
        assert fig4.ready_tasks() == ["D"]

    def test_success_only_blocks_on_failure(self, fig4):
        for tid in ("A", "B"):
            fig4.transition(tid, TaskStatus.RUNNING)
            fig4.transition(tid, TaskStatus.COMPLETED, result="ok")
        fig4.transition("C", TaskStatus.RUNNING)
        fig4.transition("C", TaskStatus.FAILED, failure_reason=FailureReason.EXECUTION_ERROR)
        # D's UNCONDITIONAL edge from C is satisfied by failure; E's
        # SUCCESS_ONLY edge from C never will be.
        assert fig4.ready_tasks() == ["D"]
        fig4.transition("D", TaskStatus.RUNNING)
        fig4.transition("D", TaskStatus.COMPLETED, result="ok")
        assert fig4.ready_tasks() == []
        assert fig4.is_quiescent()

    def test_unconditional_satisfied_by_either_terminal(self):
        c = chain("A", "B")
        c.transition("A", TaskStatus.FAILED, failure_reason=FailureReason.TIMEOUT)
        assert c.ready_tasks() == ["B"]

    def test_quiescence_false_while_running(self, fig4):
        fig4.transition("A", TaskStatus.RUNNING)
        assert not fig4.is_quiescent()

    def test_quiescence_propagates_through_blocked_chains(self, fig4):
        # C fails -> E blocked via SUCCESS_ONLY even though D could still run.
        for tid in ("A", "B"):
            fig4.transition(tid, TaskStatus.RUNNING)
            fig4.transition(tid, TaskStatus.COMPLETED, result="ok")
        fig4.transition("C", TaskStatus.RUNNING)
        fig4.transition("C", TaskStatus.FAILED, failure_reason=FailureReason.EXECUTION_ERROR)
        assert not fig4.is_quiescent()  # D is still dispatchable
        fig4.transition("D", TaskStatus.RUNNING)
        fig4.transition("D", TaskStatus.COMPLETED, result="ok")
        assert fig4.is_quiescent()


class TestCopies:
    def test_clone_is_deep(self, fig4):
        twin = fig4.clone()
        twin.tasks["A"].description = "changed"
        twin.tasks["A"].tips.append("hint")
        assert fig4.tasks["A"].description == "Build the data set"
        assert fig4.tasks["A"].tips == []

    def test_structural_equality(self, fig4):
        assert fig4.structurally_equal(fig4.clone())
        other = fig4.clone()
        other.update_task("A", {"description": "different"})
        assert not fig4.structurally_equal(other)
