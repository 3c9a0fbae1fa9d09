"""
EM fit of tau for the mixed model.

The E-step splits each observed count over the four match types by their multinomial
probabilities. The M-step minimizes the profile G_c(tau) = g_c(tau, b_hat(tau)) by Newton steps
with step halving, where g_c is the complete-data objective without the log-det term.

b_hat(tau) minimizes both g_c and g (the two differ by a term free of b), so the gradient of the
profile equals the partial gradient of g_c at b_hat. The profile Hessian adds the chain-rule term
g_tau_b * d b_hat / d tau, with the sensitivities taken by central differences of warm-started mode solves.

The trace records -g(tau_k, b_hat(tau_k)), the observed-data profile. Every accepted M-step lowers
G_c, and by Gibbs' inequality this lowers the observed profile too, so the trace is nondecreasing.

EM crawls where the likelihood is nearly flat, as it is along beta0 against theta for continuous
quality. Once progress slows (or after a few iterations) each iteration therefore also takes a
Newton step on the observed profile itself, accepted only if it lowers g.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import gammaln, logsumexp, softmax

from prc_studio.configuration import FitControls, ModeControls
from prc_studio.domain.types import MatchDataset, QualityScheme, Tau
from prc_studio.errors.errors import (
    BoundaryError,
    InvalidInputError,
    ModeNotFoundError,
    NumericalError,
)
from prc_studio.estimation.curvature import decompose_curvature
from prc_studio.likelihood.base import (
    PAIR_CHUNK,
    ModeResult,
    find_mode,
    g_objective,
    gradient_b,
    pair_arrays,
)
from prc_studio.message_handler.base import MessageHandler, get_message_handler, warn
from prc_studio.message_handler.types import EventScope, EventType, LogEvent
from prc_studio.parallel import chunks, ordered_map

MAX_CONDITION_NUMBER = 1e14
SENSITIVITY_STEP = 1e-4


@dataclass
class EmState:
    tau_k: Tau
    expected_counts: np.ndarray
    objective_k: float
    iteration: int


@dataclass
class FitResult:
    tau_hat: Tau
    tau_hessian: np.ndarray
    em_iterations: int
    converged: bool
    objective_trace: np.ndarray
    scheme: QualityScheme
    b_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    newton_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "scheme": str(self.scheme),
            "names": self.scheme.tau_names(),
            "tau_hat": self.tau_hat.to_vector().tolist(),
            "tau_hessian": self.tau_hessian.tolist(),
            "em_iterations": self.em_iterations,
            "converged": self.converged,
            "objective_trace": np.asarray(self.objective_trace).tolist(),
            "b_hat": np.asarray(self.b_hat).tolist(),
            "newton_steps": self.newton_steps,
        }

    @staticmethod
    def from_dict(d: dict) -> "FitResult":
        scheme = QualityScheme.parse(d["scheme"])
        return FitResult(
            tau_hat=Tau.from_vector(d["tau_hat"], scheme),
            tau_hessian=np.asarray(d["tau_hessian"], dtype=float),
            em_iterations=int(d["em_iterations"]),
            converged=bool(d["converged"]),
            objective_trace=np.asarray(d["objective_trace"], dtype=float),
            scheme=scheme,
            b_hat=np.asarray(d.get("b_hat", []), dtype=float),
            newton_steps=int(d.get("newton_steps", 0)),
        )


@dataclass(frozen=True)
class BhatSensitivities:
    # d b_hat / d tau and the diagonal second derivatives, both shaped (F, P).
    first: np.ndarray
    second: np.ndarray
    steps: np.ndarray


def default_init(data: MatchDataset) -> Tau:
    mean_y = float(np.mean(data.y))
    mean_mm = float(np.mean(data.m_a.astype(float) * data.m_b))
    if mean_y <= 0:
        raise BoundaryError("beta0", -math.inf, "No finite MLE: every match count is zero.")
    vector = np.concatenate(
        [np.full(data.scheme.n_theta, -0.5), [0.5 * math.log(mean_y / mean_mm), -4.0]]
    )
    return Tau.from_vector(vector, data.scheme)


def e_step(tau_k: Tau, data: MatchDataset, threads: int | None = None) -> np.ndarray:
    """Expected per-type counts y * p(u, v), shape (N, 4)."""
    arrays = pair_arrays(data)
    tau_k.check(data.scheme)
    fixed_vector = tau_k.fixed.to_vector()
    parts = ordered_map(
        lambda rows: arrays.y[rows, None]
        * softmax(arrays.design[rows] @ fixed_vector, axis=1),
        chunks(data.n_pairs, PAIR_CHUNK),
        threads,
    )
    if not parts:
        return np.zeros((0, 4))
    return np.concatenate(parts)


def _type_log_rates(t: np.ndarray, b: np.ndarray, arrays) -> np.ndarray:
    zb = b[arrays.finger_a] + b[arrays.finger_b]
    return arrays.design @ t[:-1] + (zb + arrays.log_mm)[:, None]


def g_complete(tau: Tau, b, expected_counts: np.ndarray, data: MatchDataset) -> float:
    """g_c(tau, b) = h_c + b'b / (2 sigma2) + (F / 2) log sigma2."""
    arrays = pair_arrays(data)
    t = tau.to_vector()
    b = np.asarray(b, dtype=float)
    log_rates = _type_log_rates(t, b, arrays)
    h_c = -np.sum(
        expected_counts * log_rates
        - np.exp(log_rates)
        - gammaln(expected_counts + 1.0)
    )
    return float(
        h_c + 0.5 * float(b @ b) * math.exp(-t[-1]) + 0.5 * data.n_fingers * t[-1]
    )


def complete_gradient(
    tau: Tau, expected_counts: np.ndarray, data: MatchDataset, b=None
) -> np.ndarray:
    """Gradient of the profile g_c(tau, b_hat(tau)); b defaults to b_hat(tau)."""
    arrays = pair_arrays(data)
    t = tau.to_vector()
    b = find_mode(tau, data).b_hat if b is None else np.asarray(b, dtype=float)
    rates = np.exp(_type_log_rates(t, b, arrays))
    grad = np.empty_like(t)
    grad[:-1] = -np.einsum("nt,ntp->p", expected_counts - rates, arrays.design)
    grad[-1] = 0.5 * data.n_fingers - 0.5 * float(b @ b) * math.exp(-t[-1])
    return grad


def observed_gradient(tau: Tau, data: MatchDataset, b=None) -> np.ndarray:
    """Gradient of the profile g(tau, b_hat(tau)); b defaults to b_hat(tau)."""
    arrays = pair_arrays(data)
    t = tau.to_vector()
    b = find_mode(tau, data).b_hat if b is None else np.asarray(b, dtype=float)
    lin = arrays.design @ t[:-1]
    mean_rows = np.einsum("nt,ntp->np", softmax(lin, axis=1), arrays.design)
    log_total = (
        logsumexp(lin, axis=1) + b[arrays.finger_a] + b[arrays.finger_b] + arrays.log_mm
    )
    grad = np.empty_like(t)
    grad[:-1] = -np.sum((arrays.y - np.exp(log_total))[:, None] * mean_rows, axis=0)
    grad[-1] = 0.5 * data.n_fingers - 0.5 * float(b @ b) * math.exp(-t[-1])
    return grad


def cross_derivatives(tau: Tau, b, data: MatchDataset) -> np.ndarray:
    """d^2 g / d tau d b, shape (P, F). Identical for g and g_c."""
    arrays = pair_arrays(data)
    t = tau.to_vector()
    b = np.asarray(b, dtype=float)
    rates = np.exp(_type_log_rates(t, b, arrays))
    per_pair = np.einsum("nt,ntp->np", rates, arrays.design)
    by_finger = np.zeros((data.n_fingers, t.size - 1))
    np.add.at(by_finger, arrays.finger_a, per_pair)
    np.add.at(by_finger, arrays.finger_b, per_pair)
    cross = np.empty((t.size, data.n_fingers))
    cross[:-1] = by_finger.T
    cross[-1] = -b * math.exp(-t[-1])
    return cross


def complete_hessian(
    tau: Tau, b, data: MatchDataset, sensitivities: BhatSensitivities
) -> np.ndarray:
    """
    Hessian of the profile g_c(tau, b_hat(tau)): g_tau_tau + g_tau_b * d b_hat / d tau, plus
    g_b * d2 b_hat / d tau2 on the diagonal.
    """
    arrays = pair_arrays(data)
    t = tau.to_vector()
    b = np.asarray(b, dtype=float)
    rates = np.exp(_type_log_rates(t, b, arrays))
    hessian = np.zeros((t.size, t.size))
    hessian[:-1, :-1] = np.einsum("nt,ntp,ntq->pq", rates, arrays.design, arrays.design)
    hessian[-1, -1] = 0.5 * float(b @ b) * math.exp(-t[-1])
    hessian += cross_derivatives(tau, b, data) @ sensitivities.first
    # Mode residual times the curvature of b_hat; vanishes at an exact mode.
    hessian[np.diag_indices_from(hessian)] += gradient_b(tau, b, data) @ sensitivities.second
    return 0.5 * (hessian + hessian.T)


def bhat_sensitivities(
    tau: Tau,
    data: MatchDataset,
    mode: ModeResult | None = None,
    free=None,
    controls: ModeControls | None = None,
) -> BhatSensitivities:
    """Central differences of b_hat(tau) with step 1e-4 * (1 + |tau_i|), warm-started at b_hat(tau)."""
    controls = controls or ModeControls()
    t = tau.to_vector()
    names = data.scheme.tau_names()
    free = np.ones(t.size, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    mode = mode or find_mode(tau, data, controls=controls)

    first = np.zeros((data.n_fingers, t.size))
    second = np.zeros((data.n_fingers, t.size))
    steps = np.zeros(t.size)
    for i in np.flatnonzero(free):
        h = SENSITIVITY_STEP * (1.0 + abs(t[i]))
        shifted = []
        for sign in (1.0, -1.0):
            perturbed = t.copy()
            perturbed[i] += sign * h
            try:
                shifted.append(
                    find_mode(
                        Tau.from_vector(perturbed),
                        data,
                        controls=controls,
                        b0=mode.b_hat,
                    ).b_hat
                )
            except (ModeNotFoundError, NumericalError) as e:
                raise ModeNotFoundError(
                    getattr(e, "iterations", 0),
                    getattr(e, "grad_norm", math.nan),
                    getattr(e, "b_last", mode.b_hat),
                    coordinate=names[i],
                )
        plus, minus = shifted
        steps[i] = h
        first[:, i] = (plus - minus) / (2.0 * h)
        second[:, i] = (plus - 2.0 * mode.b_hat + minus) / h**2
    return BhatSensitivities(first=first, second=second, steps=steps)


def _newton_direction(hessian: np.ndarray, grad: np.ndarray) -> np.ndarray:
    condition_number = float(np.linalg.cond(hessian))
    if not math.isfinite(condition_number) or condition_number > MAX_CONDITION_NUMBER:
        raise NumericalError(
            f"Singular Newton system in the M-step (condition number {condition_number:.3e}).",
            {"condition_number": condition_number},
        )
    ridge = 0.0
    scale = float(np.max(np.abs(np.diag(hessian)), initial=1.0))
    for _ in range(20):
        try:
            factor = cho_factor(hessian + ridge * np.eye(hessian.shape[0]))
            return cho_solve(factor, grad)
        except LinAlgError:
            # Levenberg damping for indefinite Hessians.
            ridge = 1e-8 * scale if ridge == 0.0 else ridge * 10.0
    raise NumericalError(
        "M-step Hessian could not be made positive-definite.",
        {"condition_number": condition_number, "ridge": ridge},
    )


def _check_boundary(t: np.ndarray, free: np.ndarray, names: list[str], controls: FitControls):
    for i in np.flatnonzero(free[:-1]):
        if abs(t[i]) > controls.boundary:
            raise BoundaryError(names[i], float(t[i]))
    if free[-1] and t[-1] < controls.mode.log_sigma2_floor + 1.0:
        raise BoundaryError("log_sigma2", float(t[-1]))


def _free_mask(data: MatchDataset, free, controls: FitControls) -> np.ndarray:
    mask = (
        np.ones(data.scheme.n_tau, dtype=bool)
        if free is None
        else np.array(free, dtype=bool)
    )
    if mask.shape != (data.scheme.n_tau,):
        raise InvalidInputError("free", mask.shape, "One flag per tau component.")
    if controls.fixed_log_sigma2 is not None:
        mask[-1] = False
    return mask


def m_step(
    state: EmState,
    data: MatchDataset,
    controls: FitControls | None = None,
    free=None,
    msg_handler: MessageHandler | None = None,
) -> Tau:
    """Newton minimization of the profile G_c for fixed expected counts, with step halving."""
    controls = controls or FitControls()
    arrays = pair_arrays(data)
    names = data.scheme.tau_names()
    expected = state.expected_counts
    free = _free_mask(data, free, controls)
    if float(np.sum(expected)) <= 0.0:
        raise BoundaryError(
            "beta0", -math.inf, "No finite MLE: every match count is zero."
        )

    if not free.any():
        return state.tau_k

    t = state.tau_k.to_vector()
    mode = find_mode(state.tau_k, data, controls=controls.mode, msg_handler=msg_handler)
    objective = g_complete(state.tau_k, mode.b_hat, expected, data)
    threshold = controls.m_step_tol * arrays.data_scale

    for _ in range(controls.max_newton_steps):
        tau = Tau.from_vector(t)
        grad = complete_gradient(tau, expected, data, b=mode.b_hat)[free]
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= threshold:
            break

        sensitivities = bhat_sensitivities(
            tau, data, mode=mode, free=free, controls=controls.mode
        )
        hessian = complete_hessian(tau, mode.b_hat, data, sensitivities)[
            np.ix_(free, free)
        ]
        direction = _newton_direction(hessian, grad)

        scale = 1.0
        accepted = False
        for _ in range(controls.max_halvings + 1):
            candidate = t.copy()
            candidate[free] -= scale * direction
            try:
                candidate_mode = find_mode(
                    Tau.from_vector(candidate),
                    data,
                    controls=controls.mode,
                    b0=mode.b_hat,
                    msg_handler=msg_handler,
                )
            except (ModeNotFoundError, NumericalError):
                scale *= 0.5
                continue
            candidate_objective = g_complete(
                Tau.from_vector(candidate), candidate_mode.b_hat, expected, data
            )
            if candidate_objective <= objective:
                accepted = True
                break
            scale *= 0.5

        if not accepted:
            if grad_norm <= 1e3 * threshold:
                break
            raise NumericalError(
                f"M-step found no descent after {controls.max_halvings} halvings.",
                {"grad_norm": grad_norm, "tau": t.tolist()},
            )

        t, mode, objective = candidate, candidate_mode, candidate_objective
        _check_boundary(t, free, names, controls)

    return Tau.from_vector(t, data.scheme)


def tau_hessian(
    tau: Tau,
    data: MatchDataset,
    b0=None,
    controls: ModeControls | None = None,
) -> np.ndarray:
    """Central differences of the observed-data profile gradient, symmetrized."""
    controls = controls or ModeControls()
    t = tau.to_vector()
    hessian = np.zeros((t.size, t.size))
    for i in range(t.size):
        h = SENSITIVITY_STEP * (1.0 + abs(t[i]))
        grads = []
        for sign in (1.0, -1.0):
            perturbed = t.copy()
            perturbed[i] += sign * h
            perturbed_tau = Tau.from_vector(perturbed)
            mode = find_mode(perturbed_tau, data, controls=controls, b0=b0)
            grads.append(observed_gradient(perturbed_tau, data, b=mode.b_hat))
        hessian[:, i] = (grads[0] - grads[1]) / (2.0 * h)
    return 0.5 * (hessian + hessian.T)


def profile_newton_step(
    tau: Tau,
    mode: ModeResult,
    objective: float,
    data: MatchDataset,
    controls: FitControls,
    free: np.ndarray,
    msg_handler: MessageHandler | None = None,
    threads: int | None = None,
) -> tuple[Tau, ModeResult, float]:
    """
    One Newton step on the observed-data profile g(tau, b_hat(tau)) with step halving.
    Flat directions of the curvature are left alone and negative curvature is flipped.
    Returns the inputs unchanged when no step lowers g.
    """
    t = tau.to_vector()
    grad = observed_gradient(tau, data, b=mode.b_hat)[free]
    hessian = tau_hessian(tau, data, b0=mode.b_hat, controls=controls.mode)
    direction = decompose_curvature(hessian[np.ix_(free, free)]).newton_step(grad)

    scale = 1.0
    for _ in range(controls.max_halvings + 1):
        candidate = t.copy()
        candidate[free] -= scale * direction
        candidate_tau = Tau.from_vector(candidate, data.scheme)
        try:
            candidate_mode = find_mode(
                candidate_tau,
                data,
                controls=controls.mode,
                b0=mode.b_hat,
                msg_handler=msg_handler,
            )
        except (ModeNotFoundError, NumericalError):
            scale *= 0.5
            continue
        candidate_objective = g_objective(candidate_tau, candidate_mode.b_hat, data, threads)
        if candidate_objective < objective:
            return candidate_tau, candidate_mode, candidate_objective
        scale *= 0.5
    return tau, mode, objective


def fit(
    data: MatchDataset,
    init: Tau | None = None,
    controls: FitControls | None = None,
    free=None,
    msg_handler: MessageHandler | None = None,
    threads: int | None = None,
) -> FitResult:
    controls = controls or FitControls()
    msg_handler = msg_handler or get_message_handler()
    if data.n_fingers < 2 or data.n_pairs == 0:
        raise InvalidInputError(
            "data", data.n_fingers, "Fitting needs at least two fingers and one pair."
        )
    if float(np.sum(data.y)) <= 0.0:
        raise BoundaryError(
            "beta0", -math.inf, "No finite MLE: every match count is zero."
        )

    tau = init or default_init(data)
    tau.check(data.scheme)
    if controls.fixed_log_sigma2 is not None:
        tau = tau.with_log_sigma2(controls.fixed_log_sigma2)
    free = _free_mask(data, free, controls)

    mode = find_mode(tau, data, controls=controls.mode, msg_handler=msg_handler)
    objective = g_objective(tau, mode.b_hat, data, threads)
    trace = [-objective]
    converged = False
    iteration = 0
    newton_steps = 0

    for iteration in range(1, controls.max_em_iterations + 1):
        state = EmState(
            tau_k=tau,
            expected_counts=e_step(tau, data, threads),
            objective_k=-objective,
            iteration=iteration - 1,
        )
        new_tau = m_step(state, data, controls, free, msg_handler)
        new_mode = find_mode(
            new_tau, data, controls=controls.mode, b0=mode.b_hat, msg_handler=msg_handler
        )
        new_objective = g_objective(new_tau, new_mode.b_hat, data, threads)
        slow = abs(new_objective - objective) <= controls.accelerate_below * max(1.0, abs(objective))
        if slow or iteration > controls.newton_after:
            try:
                newton_tau, new_mode, new_objective = profile_newton_step(
                    new_tau, new_mode, new_objective, data, controls, free, msg_handler, threads
                )
            except (ModeNotFoundError, NumericalError) as e:
                newton_tau = new_tau
                warn(
                    msg_handler,
                    EventScope.EM,
                    "newton_step_skipped",
                    f"Profile Newton step skipped at EM iteration {iteration}: {e}",
                )
            if newton_tau is not new_tau:
                newton_steps += 1
                _check_boundary(newton_tau.to_vector(), free, data.scheme.tau_names(), controls)
            new_tau = newton_tau
        trace.append(-new_objective)

        relative_change = abs(new_objective - objective) / max(1.0, abs(objective))
        step = float(np.max(np.abs(new_tau.to_vector() - tau.to_vector())))
        msg_handler.send_message(
            LogEvent(
                "em_iteration",
                EventType.DEBUG,
                EventScope.EM,
                f"EM iteration {iteration}: objective {-new_objective:.10g}",
                {
                    "tau": new_tau.to_dict(data.scheme),
                    "relative_change": relative_change,
                    "step": step,
                },
            )
        )
        tau, mode, objective = new_tau, new_mode, new_objective
        if relative_change <= controls.tol and step <= controls.step_tol:
            converged = True
            break

    if not converged:
        warn(
            msg_handler,
            EventScope.EM,
            "em_not_converged",
            f"EM stopped after {iteration} iterations without converging",
            {"tau": tau.to_dict(data.scheme)},
        )

    fixed_vector = tau.fixed.to_vector()
    if np.any(fixed_vector >= 0):
        warn(
            msg_handler,
            EventScope.EM,
            "nonnegative_fixed_effect",
            "Fitted fixed effects are expected to be negative",
            {
                name: value
                for name, value in zip(data.scheme.tau_names(), fixed_vector.tolist())
                if value >= 0
            },
        )

    result = FitResult(
        tau_hat=tau,
        tau_hessian=tau_hessian(tau, data, b0=mode.b_hat, controls=controls.mode),
        em_iterations=iteration,
        converged=converged,
        objective_trace=np.asarray(trace),
        scheme=data.scheme,
        b_hat=mode.b_hat,
        newton_steps=newton_steps,
    )
    msg_handler.send_message(
        LogEvent(
            "fit_finished",
            EventType.SUCCESS,
            EventScope.EM,
            f"Fit finished after {iteration} EM iterations and {newton_steps} Newton steps",
            {
                "tau_hat": tau.to_dict(data.scheme),
                "converged": converged,
                "newton_steps": newton_steps,
            },
        )
    )
    return result
