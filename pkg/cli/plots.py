"""
Модуль статического графика ошибки и границы (SVG)
"""
import io
from typing import Optional

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

# Стабильные идентификаторы элементов SVG между запусками
matplotlib.rcParams['svg.hashsalt'] = 'rewb'


def render_error_chart(frame: pd.DataFrame, title: Optional[str] = None) -> str:
    """
    Текст SVG с рядами e(t) и sqrt(N) gamma(t) в логарифмическом масштабе.

    Args:
        frame: Строки прогона с колонками t, error_l2, bound
        title: Заголовок графика
    """
    steps = frame['t'].to_numpy(dtype=float) + 1.0

    fig, ax = plt.subplots(figsize=(7, 4))
    try:
        ax.loglog(steps, frame['error_l2'].to_numpy(), label='e(t)', linewidth=1.2)
        # Неположительная граница (gamma(t) <= 0) не отображается
        bound = frame['bound'].to_numpy(dtype=float)
        ax.loglog(steps, np.where(bound > 0, bound, np.nan), label='sqrt(N) gamma(t)', linewidth=1.2, linestyle='--')
        ax.set_xlabel('t + 1')
        ax.set_ylabel('ошибка')
        if title:
            ax.set_title(title)
        ax.grid(True, which='both', alpha=0.3)
        ax.legend()

        buffer = io.StringIO()
        fig.savefig(buffer, format='svg', metadata={'Date': None})
        return buffer.getvalue()
    finally:
        plt.close(fig)
