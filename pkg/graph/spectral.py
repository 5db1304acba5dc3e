"""
Модуль спектральных характеристик сбалансированного лапласиана

M2 = L_inf^T + L_inf, M3 = L_inf^T L_inf, J = I - (1/N) 1 1^T.
Все матрицы симметричные, собственные значения считаются numpy.linalg.eigvalsh.
"""
from dataclasses import asdict, dataclass
from typing import Any, Dict

import numpy as np

from graph.balancing import balance_residual, laplacian, psi
from graph.digraph import Digraph
from utils.errors import DimensionError, ValidationError
from utils.logger import logger

# Допуск относительного остатка баланса ||L 1||_inf / (||w||_inf d_max^out)
BALANCE_CHECK_TOL = 1e-8


@dataclass(frozen=True)
class SpectralReport:
    """
    Спектральные величины для ограничений на параметры протокола.

    Attributes:
        lambda_m: Второе наименьшее собственное значение M2
        lambda_M: Наибольшее собственное значение M3
        lambda2_M3: Второе наименьшее собственное значение M3
        lambda_max_M2: Наибольшее собственное значение M2
        psi: Граница на beta_0 для данного графа
        norm_J_minus_betaL: Спектральная норма J - beta L_inf
        beta: Значение beta, для которого посчитана норма
    """
    lambda_m: float
    lambda_M: float
    lambda2_M3: float
    lambda_max_M2: float
    psi: float
    norm_J_minus_betaL: float
    beta: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def centering_matrix(n: int) -> np.ndarray:
    """J = I - (1/N) 1 1^T"""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def spectral_norm(matrix: np.ndarray) -> float:
    """Спектральная норма через собственные значения матрицы Грама"""
    gram = matrix.T @ matrix
    top = float(np.linalg.eigvalsh((gram + gram.T) / 2.0)[-1])
    return float(np.sqrt(max(top, 0.0)))


def check_balanced(g: Digraph, w_inf, tol: float = BALANCE_CHECK_TOL) -> float:
    """Относительный остаток баланса; ValidationError, если он больше tol"""
    weights = np.asarray(w_inf, dtype=float)
    if weights.shape != (g.n,):
        raise DimensionError(f"Вектор весов размера {weights.shape}, ожидается ({g.n},)")

    scale = float(np.max(np.abs(weights))) * g.d_max_out
    if scale <= 0:
        raise ValidationError("Веса должны быть строго положительными")

    relative = balance_residual(g, weights) / scale
    if relative > tol:
        raise ValidationError(
            f"Веса не балансируют граф: относительный остаток {relative:.3e} > {tol:.1e}"
        )
    return relative


def spectral_report(g: Digraph, w_inf, beta: float) -> SpectralReport:
    """
    Спектральный отчет для сбалансированного графа.

    Args:
        g: Сильно связный граф
        w_inf: Балансирующие веса
        beta: Шаг консенсуса, для которого считается ||J - beta L_inf||

    Returns:
        SpectralReport
    """
    check_balanced(g, w_inf)
    lap = laplacian(g, w_inf)

    m2 = lap.T + lap
    m3 = lap.T @ lap
    m3 = (m3 + m3.T) / 2.0

    eig_m2 = np.linalg.eigvalsh(m2)
    eig_m3 = np.linalg.eigvalsh(m3)

    norm = spectral_norm(centering_matrix(g.n) - beta * lap)

    report = SpectralReport(
        lambda_m=float(eig_m2[1]),
        lambda_M=float(eig_m3[-1]),
        lambda2_M3=float(eig_m3[1]),
        lambda_max_M2=float(eig_m2[-1]),
        psi=psi(g),
        norm_J_minus_betaL=norm,
        beta=float(beta)
    )
    logger.debug(f"Спектр: lambda_m={report.lambda_m:.6g}, lambda_M={report.lambda_M:.6g}, "
                 f"||J - beta L||={norm:.6g}")
    return report
