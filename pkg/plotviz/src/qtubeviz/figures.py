"""Figure composition for the four trajectory views.

All inputs are loaded and validated before a figure object is created,
so a malformed CSV can never leave a partial image behind.  Content is
matched to the run data; axis ranges and styling are left to the
plotting defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .data import REQUIRED_COLUMNS, Trajectory, load_manifest, load_trajectory

KINDS = tuple(REQUIRED_COLUMNS)


@dataclass
class FigureSpec:
    """Inputs of one rendering call.

    ``csv_paths`` and ``labels`` run in parallel; the geometry numbers
    (tube radius, strip half-width, reference rates, circle radius) come
    from the manifest, which the solver package fills.
    """

    kind: str
    csv_paths: list[Path]
    out: Path
    labels: list[str] = field(default_factory=list)
    delta: float | None = None
    rate_gamma: float | None = None
    rate_gamma_lambda2: float | None = None
    strip_half_width_v: float | None = None
    circle_radius: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; pick one of {', '.join(KINDS)}")
        if not self.csv_paths:
            raise ValueError("need at least one trajectory CSV")
        self.csv_paths = [Path(p) for p in self.csv_paths]
        self.out = Path(self.out)
        if not self.labels:
            self.labels = [p.stem for p in self.csv_paths]


def spec_from_manifest(kind: str, manifest_path, out, trajectory: str | None = None) -> FigureSpec:
    """Build a FigureSpec from a run manifest.

    ``trajectory`` filters single-trajectory figures to one label; the
    default is the first entry.
    """
    manifest_path = Path(manifest_path)
    doc = load_manifest(manifest_path)
    entries = doc["trajectories"]
    if trajectory is not None:
        entries = [entry for entry in entries if entry["label"] == trajectory]
        if not entries:
            raise ValueError(f"no trajectory labeled {trajectory!r} in {manifest_path}")
    if kind in ("normalized_decay", "projected_single"):
        entries = entries[:1]
    circle = doc.get("circle") or {}
    return FigureSpec(
        kind=kind,
        csv_paths=[manifest_path.parent / entry["csv"] for entry in entries],
        out=out,
        labels=[entry["label"] for entry in entries],
        delta=doc.get("delta"),
        rate_gamma=doc.get("rate_gamma"),
        rate_gamma_lambda2=doc.get("rate_gamma_lambda2"),
        strip_half_width_v=doc.get("strip_half_width_v"),
        circle_radius=circle.get("radius"),
    )


def _load_all(spec: FigureSpec) -> list[Trajectory]:
    required = REQUIRED_COLUMNS[spec.kind]
    return [
        load_trajectory(path, required, label)
        for path, label in zip(spec.csv_paths, spec.labels)
    ]


def _circle_points(radius: float) -> tuple[np.ndarray, np.ndarray]:
    theta = np.linspace(0.0, 2.0 * np.pi, 256)
    return radius * np.cos(theta), radius * np.sin(theta)


def _decay_axes(ax, traj: Trajectory, spec: FigureSpec) -> None:
    k = traj["k"]
    for column, label in (("inf_err", "sup error"), ("dist2_x1", "distance to the line")):
        series = traj[column]
        if series[0] <= 0.0:
            raise ValueError(f"{traj.label}: initial {column} is zero; cannot normalize")
        ax.semilogy(k, series / series[0], label=f"{label} (normalized)")
    if spec.rate_gamma is not None:
        ax.semilogy(k, spec.rate_gamma**k, "--", label="gamma^k")
    if spec.rate_gamma_lambda2 is not None:
        ax.semilogy(k, spec.rate_gamma_lambda2**k, "--", label="(gamma |lambda2|)^k")
    ax.set_xlabel("k")
    ax.set_ylabel("normalized magnitude")


def _projected_axes(ax, trajs: list[Trajectory], spec: FigureSpec) -> None:
    for traj in trajs:
        ax.plot(traj["u"], traj["v"], marker=".", linewidth=1.0, label=f"path {traj.label}")
    if spec.strip_half_width_v is not None:
        ax.axhspan(
            -spec.strip_half_width_v, spec.strip_half_width_v,
            alpha=0.15, label="tube slice",
        )
    ax.axhline(0.0, color="black", linewidth=0.8, label="X1 slice")
    if spec.kind == "projected_multi" and spec.circle_radius is not None:
        cx, cy = _circle_points(spec.circle_radius)
        ax.plot(cx, cy, ":", color="gray", label="initial circle")
    ax.set_xlabel("u")
    ax.set_ylabel("v")


def _rotated_axes(ax, trajs: list[Trajectory], spec: FigureSpec) -> None:
    for traj in trajs:
        ax.plot(traj["p"], traj["q"], marker=".", linewidth=0.8, label=f"path {traj.label}")
    lo = min(float(traj["p"].min()) for traj in trajs)
    hi = max(float(traj["p"].max()) for traj in trajs)
    span = np.linspace(lo - 0.1, hi + 0.1, 64)
    ax.plot(span, span, color="black", linewidth=0.8, label="q = p")
    if spec.delta is not None:
        half = 2.0 * spec.delta
        ax.fill_between(span, span - half, span + half, alpha=0.15, label="|q - p| <= 2 delta")
    if spec.circle_radius is not None:
        cx, cy = _circle_points(spec.circle_radius)
        ax.plot(cx, cy, ":", color="gray", label="initial circle")
    ax.set_xlabel("p")
    ax.set_ylabel("q")


def compose(spec: FigureSpec):
    """Load, validate, and draw; returns the matplotlib figure."""
    trajs = _load_all(spec)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    if spec.kind == "normalized_decay":
        _decay_axes(ax, trajs[0], spec)
    elif spec.kind in ("projected_single", "projected_multi"):
        _projected_axes(ax, trajs, spec)
    else:
        _rotated_axes(ax, trajs, spec)
    ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Compose and save; nothing is written when composition fails."""
    fig = compose(spec)
    try:
        spec.out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out, dpi=160)
    finally:
        plt.close(fig)
    return spec.out
