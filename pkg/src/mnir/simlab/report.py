"""Monte Carlo report container with JSON, text and CSV renderings."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np


def to_jsonable(obj):
    """Recursively convert numpy containers and scalars to plain Python."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def _fmt(v, spec=".4f"):
    return "n/a" if v is None or not np.isfinite(v) else format(v, spec)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


@dataclass
class McReport:
    """Result of one Monte Carlo verification.

    ``runtime`` is wall-clock seconds; it is shown in the text rendering
    but kept out of the JSON so reports are byte-identical across reruns
    and worker counts.
    """

    kind: str
    config: dict
    seed: int
    replicates: int
    failed: int = 0
    redraws: int = 0
    results: dict = field(default_factory=dict)
    runtime: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config,
            "seed": self.seed,
            "replicates": self.replicates,
            "failed": self.failed,
            "redraws": self.redraws,
            "results": self.results,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def ladder_rows(self):
        """Flat rows ``(mode, m, probe, empirical, theoretical, ratio)`` for predictive-variance runs."""
        rows = []
        for mode, ladder in sorted(self.results.get("ladders", {}).items()):
            for level in ladder:
                for pr in level["probes"]:
                    rows.append((mode, level["m"], pr["probe_sd"], pr["empirical_var"],
                                 pr["theoretical_var"], pr["ratio"]))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("mode,m,probe_sd,empirical_var,theoretical_var,ratio\n")
        for row in self.ladder_rows():
            buf.write(",".join("" if v is None else repr(v) if isinstance(v, float) else str(v)
                               for v in row) + "\n")
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"{self.kind}: R={self.replicates} seed={self.seed} "
                 f"failed={self.failed} redraws={self.redraws} runtime={self.runtime:.2f}s"]
        r = self.results
        if self.kind == "prop1":
            lines.append(f"  M = {r['total_words']}   nuisance = {r['nuisance']}")
            for key in ("loadings_target", "efficient_target"):
                t = r[key]
                ratios = np.asarray(t["diag_ratio"])
                lines.append(
                    f"  vs {key:<17} frobenius_rel_err {t['frobenius_rel_err']:8.4f}"
                    f"   diag ratio min {ratios.min():6.3f} max {ratios.max():6.3f}"
                )
            lines.append(f"  band for a diagonal ratio at this R: "
                         f"[{r['ratio_band'][0]:.3f}, {r['ratio_band'][1]:.3f}]")
            lines.append(f"  max |mean error| z-score {np.abs(r['mean_error_z']).max():.3f}")
        elif self.kind == "prop2":
            lines.append(f"  {'mode':<6} {'m':>6} {'probe':>6} {'empirical':>12} "
                         f"{'theory':>12} {'ratio':>8}")
            for mode, m, probe, emp, theo, ratio in self.ladder_rows():
                rs = "     n/a" if ratio is None else f"{ratio:8.4f}"
                lines.append(f"  {mode:<6} {m:>6d} {probe:>6.2f} {emp:>12.6g} {theo:>12.6g} {rs}")
        elif self.kind == "efficiency":
            lines.append(f"  mean test MSE  mnir-ols {r['mse_mnir']:.6g}   naive-ols {r['mse_naive']:.6g}")
            lines.append(f"  MSE ratio naive/mnir: of means {_fmt(r['ratio_of_means'])}, "
                         f"median {_fmt(r['median_ratio'])}, share > 1: {r['share_mnir_wins']:.3f}")
            lines.append(f"  ridge fallbacks {r['ridge_fallbacks']}")
        return "\n".join(lines) + "\n"
