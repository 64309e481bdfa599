"""Solver run summaries and their JSON serialization."""
import json
from dataclasses import dataclass, field

JSON_FIELDS = ("method", "iterations", "rel_residual", "wall_time_s", "history",
               "peak_mem_bytes", "converged", "extra")


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``rel_residual`` is always recomputed explicitly from the returned
    solution (never the recursively updated estimate). ``history`` holds one
    entry per iteration when recorded. Method-specific diagnostics go in
    ``extra``.
    """

    method: str
    iterations: int
    rel_residual: float
    wall_time: float
    peak_mem_estimate: int
    converged: bool = True
    history: list = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "method": self.method,
            "iterations": int(self.iterations),
            "rel_residual": float(self.rel_residual),
            "wall_time_s": float(self.wall_time),
            "history": None if self.history is None else [float(h) for h in self.history],
            "peak_mem_bytes": int(self.peak_mem_estimate),
            "converged": bool(self.converged),
            "extra": _jsonable(self.extra),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        missing = [k for k in JSON_FIELDS if k not in d]
        if missing:
            raise ValueError(f"report is missing fields {missing}")
        return cls(method=d["method"], iterations=d["iterations"], rel_residual=d["rel_residual"],
                   wall_time=d["wall_time_s"], peak_mem_estimate=d["peak_mem_bytes"],
                   converged=d["converged"], history=d["history"], extra=d["extra"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and getattr(obj, "ndim", 1) == 0:
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    return obj
