"""Assembly of the analyze document from the solver and certificate layers.

The document is a plain JSON-ready dict so that serialization is the
identity and round-trips are lossless.
"""

from __future__ import annotations

import numpy as np

from . import __version__
from .geometry import default_basis, k_basic, k_id, strip_half_width, tube_from_report
from .jsr import JsrCertificate, certify, overlap_bounds
from .mdp import ValidatedMdp, q_to_table
from .solver import OptimalityReport, solve_qstar

REPORT_SCHEMA = "qtube.report.v1"


def certificate_to_dict(cert: JsrCertificate) -> dict:
    envelope = None
    if cert.envelope is not None:
        envelope = {
            "eta": cert.envelope.eta,
            "beta": cert.envelope.beta,
            "depth": cert.envelope.depth,
            "c0": cert.envelope.c0,
            "c_sq": cert.envelope.c_sq,
            "c": cert.envelope.c,
        }
    obstruction = None
    if cert.obstruction is not None:
        obstruction = {
            "policy": list(cert.obstruction.policy),
            "reason": cert.obstruction.reason,
        }
    return {
        "family": cert.family_label,
        "gamma": cert.gamma,
        "depth": cert.depth,
        "num_members": cert.num_members,
        "upper_bound": cert.upper_bound,
        "lower_bound": cert.lower_bound,
        "strict": cert.strict,
        "method_trace": [[method, int(depth), float(value)] for method, depth, value in cert.method_trace],
        "p_min": cert.p_min,
        "eps_doeblin": cert.eps_doeblin,
        "envelope": envelope,
        "obstruction": obstruction,
        "notes": list(cert.notes),
    }


def optimality_to_dict(report: OptimalityReport) -> dict:
    table = q_to_table(report.q_star, report.num_states, report.num_actions)
    return {
        "q_star": table.tolist(),
        "v_star": report.v_star.tolist(),
        "phi_star": [list(acts) for acts in report.phi_star],
        "s_sep": list(report.s_sep),
        "delta_bar": report.delta_bar,
        "delta_bar_per_state": report.delta_bar_per_state.tolist(),
        "pi_star": report.pi_star.tolist(),
        "iterations": report.iterations,
        "residual": report.residual,
        "tol_opt": report.tol_opt,
    }


def build_analyze_report(
    mdp: ValidatedMdp,
    delta_frac: float = 0.4,
    depth: int = 3,
    cap: int = 4096,
    tol: float = 1e-9,
) -> dict:
    """Solve, certify, and assemble the full analysis document.

    State and action indices in the document are zero-based.  The
    horizon section uses the zero vector as the default starting point.
    """
    report = solve_qstar(mdp, tol=tol)
    cert_full = certify(mdp, depth=depth, family_label="full", report=report, cap=cap)
    cert_opt = certify(mdp, depth=depth, family_label="optimal", report=report, cap=cap)
    p_min, eps_doeblin = overlap_bounds(mdp)

    tube_doc = None
    basis_doc = None
    if report.delta_bar is not None:
        tube = tube_from_report(report, delta_frac)
        basis = default_basis(mdp, report)
        tube_doc = {
            "fraction": tube.fraction,
            "delta_bar": tube.delta_bar,
            "delta": tube.delta,
            "strip_half_width_v": strip_half_width(tube, basis),
        }
        basis_doc = {"label": basis.label, "d_hat": basis.d_hat.tolist()}

    q0 = np.zeros(mdp.num_pairs)
    inf_err0 = float(np.abs(q0 - report.q_star).max())
    dist2_0 = float(np.linalg.norm((q0 - report.q_star) - (q0 - report.q_star).mean()))
    horizons = {
        "q0": "zeros",
        "inf_err0": inf_err0,
        "dist2_0": dist2_0,
        "k_basic": None,
        "k_id": None,
    }
    if report.delta_bar is not None:
        horizons["k_basic"] = k_basic(inf_err0, report.delta_bar, mdp.gamma)
        if cert_full.envelope is not None:
            horizons["k_id"] = k_id(
                dist2_0, report.delta_bar, cert_full.envelope.c, cert_full.envelope.beta
            )

    return {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "config": {"delta_frac": delta_frac, "depth": depth, "cap": cap, "tol": tol},
        "mdp": {
            "name": mdp.name,
            "gamma": mdp.gamma,
            "num_states": mdp.num_states,
            "num_actions": mdp.num_actions,
        },
        "optimality": optimality_to_dict(report),
        "optimal_policy_count": int(np.prod([len(acts) for acts in report.phi_star])),
        "tube": tube_doc,
        "basis": basis_doc,
        "certificates": {
            "full": certificate_to_dict(cert_full),
            "optimal": certificate_to_dict(cert_opt),
        },
        "overlap": {"p_min": p_min, "eps_doeblin": eps_doeblin},
        "obstruction": {
            "found": cert_full.obstruction is not None,
            "policy": list(cert_full.obstruction.policy) if cert_full.obstruction else None,
            "reason": cert_full.obstruction.reason if cert_full.obstruction else None,
        },
        "horizons": horizons,
    }
