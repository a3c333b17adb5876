"""
Console report templates for the command-line tool
"""
from typing import List, Optional


class Messages:
    # Solve
    SOLVE_DONE = "{mode} on '{case}': {status}, objective {objective}, {nodes} B&B node(s)"
    SOLVE_NO_SOLUTION = "{mode} on '{case}' has no solution: {status}"
    TOPOLOGY_HEADER = "DC topology (line: default -> chosen)"
    TOPOLOGY_LINE = "  line {line} ({from_node}-{to_node}): {default} -> {alpha}{mark}"
    CONES_TIGHT = "All relaxation cones tight (max relative slack {value})"
    CONES_SLACK = "{count} relaxation cone(s) exceed slack tolerance {tolerance}: {names}"

    # GBD
    GBD_DONE = ("GBD ({cut}-cut, {timing}) stopped by {rule} after {iterations} iteration(s): "
                "objective {objective}, LB {lb}, best UB {ub}, gap {gap}")
    GBD_NOT_CONVERGED = "GBD did not converge within {iterations} iteration(s)"
    GBD_DEVIATION = "Asynchronous objective deviates from synchronous by {deviation} ({relative} relative)"

    # Evaluation
    EVALUATE_DONE = ("{mode} decisions feasible in {feasible}/{total} scenario(s) ({ratio}); "
                     "objective min {min} / max {max} / mean {mean}")

    # Accuracy
    ACCURACY_ROUND = "  round {round}: max |u_lin - u_nonlin| = {error}"
    ACCURACY_FAILED = "  {failure}"

    # Validation
    CASE_VALID = "Case '{case}' is valid"
    CASE_INVALID = "Case '{case}' has {count} violation(s):"
    VIOLATION_LINE = "  [{rule}] {element}: {message}"

    # Export
    EXPORTED = "Wrote {mode} program ({variables} variables, {binaries} binaries, {constraints} rows, {cones} cones) to {path}"

    # Errors
    USAGE_ERROR = "Invalid options: {error}"
    RUN_ERROR = "Run failed: {error}"

    @staticmethod
    def number(value: Optional[float]) -> str:
        return "n/a" if value is None else f"{value:.6f}"

    @staticmethod
    def format_solve(mode: str, case: str, status: str, objective: Optional[float], nodes: int) -> str:
        return Messages.SOLVE_DONE.format(
            mode=mode.upper(), case=case, status=status, objective=Messages.number(objective), nodes=nodes
        )

    @staticmethod
    def format_topology(rows: List[dict]) -> str:
        lines = [Messages.TOPOLOGY_HEADER]
        for row in rows:
            lines.append(Messages.TOPOLOGY_LINE.format(
                line=row["line"], from_node=row["from"], to_node=row["to"], default=row["default"],
                alpha=row["alpha"], mark="  (switched)" if row["changed"] else "",
            ))
        return "\n".join(lines)

    @staticmethod
    def format_cones(report) -> str:
        if report.tight:
            return Messages.CONES_TIGHT.format(value=f"{report.max_relative:.2e}")
        names = ", ".join(c.name for c in report.flagged[:10])
        return Messages.CONES_SLACK.format(count=len(report.flagged), tolerance=report.tolerance, names=names)

    @staticmethod
    def format_gbd(result, cut: str, asynchronous: bool) -> str:
        return Messages.GBD_DONE.format(
            cut=cut, timing="async" if asynchronous else "sync", rule=result.stop_rule.value,
            iterations=result.iterations, objective=Messages.number(result.objective),
            lb=Messages.number(result.lb), ub=Messages.number(result.best_ub), gap=f"{result.gap:.2e}",
        )

    @staticmethod
    def format_deviation(objective: Optional[float], reference: Optional[float]) -> str:
        if objective is None or reference is None:
            return Messages.GBD_DEVIATION.format(deviation="n/a", relative="n/a")
        deviation = objective - reference
        relative = deviation / abs(reference) if reference else float("inf")
        return Messages.GBD_DEVIATION.format(deviation=f"{deviation:.6e}", relative=f"{relative:.3%}")

    @staticmethod
    def format_evaluation(summary: dict) -> str:
        return Messages.EVALUATE_DONE.format(
            mode=str(summary["mode"]).upper(), feasible=summary["feasible"], total=summary["scenarios"],
            ratio=f"{summary['feasible_ratio']:.0%}", min=Messages.number(summary["objective_min"]),
            max=Messages.number(summary["objective_max"]), mean=Messages.number(summary["objective_mean"]),
        )

    @staticmethod
    def format_accuracy(errors: List[Optional[float]], failures: List[str]) -> str:
        lines = ["Linearization accuracy"]
        for k, error in enumerate(errors):
            lines.append(Messages.ACCURACY_ROUND.format(
                round=k, error="n/a" if error is None else f"{error:.3e}"
            ))
        lines += [Messages.ACCURACY_FAILED.format(failure=f) for f in failures]
        return "\n".join(lines)

    @staticmethod
    def format_validation(case: str, report) -> str:
        if report.valid:
            return Messages.CASE_VALID.format(case=case)
        lines = [Messages.CASE_INVALID.format(case=case, count=len(report.violations))]
        for v in report.violations:
            lines.append(Messages.VIOLATION_LINE.format(rule=v.rule, element=v.element, message=v.message))
        return "\n".join(lines)
