"""
Модуль параметров протокола REWB: расписания шагов и проверка ограничений инициализации

alpha(t) = alpha0 / (1+t)^alpha1
beta(t)  = beta0 / (1+t)^beta1
mu(t)    = mu0 / (t+1)^mu1
"""
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from graph.balancing import balance_relative, balancing_initial_bound, psi
from graph.digraph import Digraph, require_protocol_ready
from graph.spectral import spectral_report
from utils.errors import NotStronglyConnectedError, ParameterError, ValidationError
from utils.logger import logger

WEIGHT_MODES = ('dynamic', 'frozen')

SEVERITY_ERROR = 'error'
SEVERITY_WARNING = 'warning'
SEVERITY_INFO = 'info'


@dataclass(frozen=True)
class ProtocolParams:
    """
    Настраиваемые параметры протокола (значения по умолчанию - опубликованная симуляция).

    weight_mode: dynamic (балансировка на каждом шаге) | frozen (веса остаются равны начальным)
    initial_weight: Начальный вес w_i(0) каждой вершины
    """
    alpha0: float = 0.01
    alpha1: float = 0.075
    beta0: float = 0.01
    beta1: float = 0.01
    mu0: float = 0.025
    mu1: float = 0.025
    c1: float = 75.0
    c2: float = 75.0
    eta: float = 0.5
    s: float = 0.405
    Theta: float = 50.0
    theta1: float = 1.0
    weight_mode: str = 'dynamic'
    initial_weight: float = 0.1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_updates(self, **changes) -> 'ProtocolParams':
        return replace(self, **changes)


@dataclass(frozen=True)
class Diagnostic:
    """Результат одной проверки: severity = error | warning | info"""
    code: str
    severity: str
    message: str
    value: Optional[float] = None
    bound: Optional[float] = None

    @property
    def is_error(self) -> bool:
        return self.severity == SEVERITY_ERROR

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Schedules:
    """Значения alpha, beta, mu на шагах 0..horizon"""
    alpha: np.ndarray
    beta: np.ndarray
    mu: np.ndarray


def alpha(params: ProtocolParams, t: int) -> float:
    return params.alpha0 / (1.0 + t) ** params.alpha1


def beta(params: ProtocolParams, t: int) -> float:
    return params.beta0 / (1.0 + t) ** params.beta1


def mu(params: ProtocolParams, t: int) -> float:
    return params.mu0 / (t + 1.0) ** params.mu1


def schedules(params: ProtocolParams, horizon: int) -> Schedules:
    """Векторные расписания на шагах 0..horizon"""
    steps = np.arange(horizon + 1, dtype=float) + 1.0
    return Schedules(
        alpha=params.alpha0 / steps ** params.alpha1,
        beta=params.beta0 / steps ** params.beta1,
        mu=params.mu0 / steps ** params.mu1
    )


def mu_upper_bound(lambda_m: float, lambda_M: float, beta0: float, c1: float) -> float:
    """(lambda_m - beta0 lambda_M) beta0 / (2 c1)"""
    return (lambda_m - beta0 * lambda_M) * beta0 / (2.0 * c1)


def _hard_checks(params: ProtocolParams) -> List[Diagnostic]:
    found = []

    positive = ('alpha0', 'alpha1', 'beta0', 'beta1', 'mu0', 'mu1', 'c1', 'c2', 'Theta', 'theta1', 'initial_weight')
    for name in positive:
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            found.append(Diagnostic(f'{name}_positive', SEVERITY_ERROR, f"{name} должен быть положительным", value, 0.0))

    order = [('beta1', params.beta1), ('mu1', params.mu1), ('alpha1', params.alpha1), ('theta1', params.theta1)]
    for (low_name, low), (high_name, high) in zip(order, order[1:]):
        if not low < high:
            found.append(Diagnostic(
                'exponent_order', SEVERITY_ERROR,
                f"Нарушен порядок показателей 0 < beta1 < mu1 < alpha1 < theta1: {low_name}={low} >= {high_name}={high}",
                low, high
            ))

    if not 0.0 <= params.s < 0.5:
        found.append(Diagnostic('s_range', SEVERITY_ERROR, "s должен лежать в [0, 1/2)", params.s, 0.5))
    else:
        alpha_bound = 1.0 / (1.0 - 2.0 * params.s)
        if params.alpha0 > alpha_bound:
            found.append(Diagnostic('alpha0_bound', SEVERITY_ERROR,
                                    "alpha0 превышает 1/(1-2s)", params.alpha0, alpha_bound))

    if not 0.0 < params.eta < 1.0:
        found.append(Diagnostic('eta_range', SEVERITY_ERROR, "eta должна лежать в (0, 1)", params.eta, 1.0))

    if params.weight_mode not in WEIGHT_MODES:
        found.append(Diagnostic('weight_mode', SEVERITY_ERROR,
                                f"Неизвестный режим весов: {params.weight_mode}"))
    return found


def _sufficient_checks(params: ProtocolParams, g: Digraph, w0: np.ndarray, severity: str) -> List[Diagnostic]:
    found = []

    graph_psi = psi(g)
    if not params.beta0 < graph_psi:
        found.append(Diagnostic('beta0_psi', severity, "beta0 >= psi(графа)", params.beta0, graph_psi))

    w_bound = balancing_initial_bound(g)
    peak = float(np.max(w0))
    if peak > w_bound:
        found.append(Diagnostic('initial_weight_bound', severity,
                                "w_i(0) превышает (1/d_max^out)^(2*diameter+1)", peak, w_bound))

    w_inf = balance_relative(g, w0).w_inf
    report = spectral_report(g, w_inf, params.beta0)
    mu_bound = mu_upper_bound(report.lambda_m, report.lambda_M, params.beta0, params.c1)
    if not params.mu0 < mu_bound:
        found.append(Diagnostic('mu0_bound', severity,
                                "mu0 >= (lambda_m - beta0 lambda_M) beta0 / (2 c1)", params.mu0, mu_bound))

    if params.weight_mode == 'frozen':
        found.append(Diagnostic('frozen_weights', SEVERITY_INFO,
                                "Веса заморожены: достаточные условия сформулированы для балансировки"))
    return found


def validate_params(params: ProtocolParams, g: Digraph, w0=None, strict: bool = False) -> List[Diagnostic]:
    """
    Проверка ограничений инициализации.

    Жесткие ограничения (порядок показателей, границы alpha0, eta, s) всегда имеют
    severity=error. Достаточные условия (beta0 < psi, граница mu0, граница w(0))
    дают предупреждения, а в строгом режиме - ошибки.

    Args:
        params: Параметры протокола
        g: Граф связи
        w0: Начальные веса (по умолчанию params.initial_weight для всех вершин)
        strict: Строгий режим

    Returns:
        Список диагностик

    Raises:
        ParameterError: Только в строгом режиме, если есть ошибки
    """
    diagnostics = _hard_checks(params)

    if w0 is None:
        w0 = np.full(g.n, params.initial_weight)
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != (g.n,) or not np.all(w0 > 0):
        diagnostics.append(Diagnostic('initial_weights', SEVERITY_ERROR,
                                      "Начальные веса должны быть положительным вектором длины N"))

    try:
        require_protocol_ready(g)
    except NotStronglyConnectedError as e:
        diagnostics.append(Diagnostic('graph', SEVERITY_ERROR, str(e)))

    if not any(d.is_error for d in diagnostics):
        severity = SEVERITY_ERROR if strict else SEVERITY_WARNING
        diagnostics.extend(_sufficient_checks(params, g, w0, severity))

    for diagnostic in diagnostics:
        if diagnostic.severity == SEVERITY_WARNING:
            logger.warning(f"[{diagnostic.code}] {diagnostic.message}: {diagnostic.value} (граница {diagnostic.bound})")

    errors = [d for d in diagnostics if d.is_error]
    if strict and errors:
        logger.error(f"Строгая проверка параметров не пройдена: {', '.join(d.code for d in errors)}")
        raise ParameterError(f"Нарушены ограничения параметров: {', '.join(d.code for d in errors)}",
                             diagnostics=diagnostics)
    return diagnostics


def compliant_params(g: Digraph, base: Optional[ProtocolParams] = None,
                     w0_fraction: float = 0.5) -> Tuple[ProtocolParams, float]:
    """
    Параметры, удовлетворяющие всем достаточным условиям на графе g.

    beta0 = psi/2 (уменьшается вдвое, пока граница mu0 не станет положительной),
    mu0 - половина границы, alpha0 = c1 mu0 / (2 (1 + sqrt(N))), так что
    коэффициент при gamma1 остается меньше 1.

    Returns:
        (параметры, начальный вес w_i(0))
    """
    if not 0.0 < w0_fraction <= 1.0:
        raise ValidationError(f"w0_fraction должна лежать в (0, 1]: {w0_fraction}")
    require_protocol_ready(g)

    base = base or ProtocolParams(c1=1.0, c2=1.0, s=0.25)
    w0 = w0_fraction * balancing_initial_bound(g)
    w_inf = balance_relative(g, np.full(g.n, w0)).w_inf

    beta0 = 0.5 * psi(g)
    for _ in range(60):
        report = spectral_report(g, w_inf, beta0)
        bound = mu_upper_bound(report.lambda_m, report.lambda_M, beta0, base.c1)
        if bound > 0:
            break
        beta0 *= 0.5
    else:
        raise ParameterError("Не удалось подобрать beta0 с положительной границей mu0")

    mu0 = 0.5 * bound
    alpha0 = 0.5 * base.c1 * mu0 / (1.0 + math.sqrt(g.n))
    params = replace(base, beta0=beta0, mu0=mu0, alpha0=alpha0, initial_weight=w0, weight_mode='dynamic')
    logger.debug(f"Согласованные параметры: beta0={beta0:.6g}, mu0={mu0:.6g}, alpha0={alpha0:.6g}, w0={w0:.6g}")
    return params, w0
