"""
Главный модуль симулятора устойчивого распределенного оценивания (REWB)

Коды выхода: 0 - успех, 2 - ошибка валидации, 3 - расхождение/нарушение в строгом режиме,
4 - ошибка ввода-вывода, 1 - непредвиденная ошибка.
"""
import argparse
import asyncio
import json
import sys
from datetime import datetime
from typing import List, Optional

from cli.commands import cmd_balance, cmd_compare, cmd_gen_graph, cmd_run, cmd_sweep, cmd_validate
from utils.config import Config
from utils.converters import DataConverter
from utils.errors import RewbError
from utils.logger import logger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='rewb', description='Симулятор REWB')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen-graph', help='Генерация сильно связного случайного графа')
    gen.add_argument('--n', type=int, required=True)
    gen.add_argument('--p', type=float, required=True)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--out', required=True)

    balance = commands.add_parser('balance', help='Балансировка весов графа')
    balance.add_argument('--graph', required=True)
    balance.add_argument('--tol', type=float, default=1e-12)
    balance.add_argument('--w0', type=float, default=None)
    balance.add_argument('--out', default=None)

    validate = commands.add_parser('validate', help='Проверка параметров протокола')
    validate.add_argument('--config', default=None)
    validate.add_argument('--strict', action='store_true')

    run = commands.add_parser('run', help='Прогон эксперимента')
    _add_run_flags(run)
    run.add_argument('--strict', action='store_true', default=None)

    compare = commands.add_parser('compare', help='Сравнение двух конфигураций')
    compare.add_argument('--config', nargs=2, required=True, metavar=('A', 'B'))
    compare.add_argument('--out', default=None)
    compare.add_argument('--seed', type=int, default=None)
    compare.add_argument('--horizon', type=int, default=None)
    compare.add_argument('--stride', type=int, default=None)
    compare.add_argument('--workers', type=int, default=None)

    sweep = commands.add_parser('sweep', help='Серия прогонов по seed')
    _add_run_flags(sweep, with_seed=False)
    sweep.add_argument('--seeds', type=int, nargs='+', required=True)
    sweep.add_argument('--workers', type=int, default=None)

    return parser


def _add_run_flags(parser: argparse.ArgumentParser, with_seed: bool = True):
    parser.add_argument('--config', default=None)
    parser.add_argument('--out', default=None)
    if with_seed:
        parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--stride', type=int, default=None)
    parser.add_argument('--horizon', type=int, default=None)


class SimulatorApp:
    """Основной класс приложения: проверка окружения и выполнение команды"""

    def __init__(self):
        self.config = Config()
        self.start_time = None

    def initialize(self):
        """Проверка конфигурации процесса"""
        self.config.validate()
        logger.debug("Инициализация завершена успешно")

    async def execute(self, args: argparse.Namespace) -> int:
        """Выполнение команды, возвращает код выхода"""
        self.start_time = datetime.now()
        self.initialize()

        if args.command == 'gen-graph':
            path = cmd_gen_graph(args.n, args.p, args.seed, args.out)
            self._emit({'graph': str(path)})
        elif args.command == 'balance':
            out_dir = args.out or self.config.REWB_OUTPUT_DIR
            self._emit(cmd_balance(args.graph, args.tol, out_dir, w0=args.w0))
        elif args.command == 'validate':
            listing = cmd_validate(args.config, strict=args.strict)
            self._emit(listing)
            if listing['errors']:
                return 2
        elif args.command == 'run':
            record = cmd_run(args.config, args.out, seed=args.seed, strict=args.strict,
                             stride=args.stride, horizon=args.horizon)
            self._emit(record.summary)
        elif args.command == 'compare':
            comparison = await cmd_compare(args.config[0], args.config[1], args.out, seed=args.seed,
                                           horizon=args.horizon, stride=args.stride, workers=args.workers)
            self._emit({'error_ratio': comparison.error_ratio,
                        'disagreement_ratio': comparison.disagreement_ratio,
                        'differences': comparison.differences})
        elif args.command == 'sweep':
            result = await cmd_sweep(args.config, args.seeds, args.out, horizon=args.horizon,
                                     stride=args.stride, workers=args.workers)
            self._emit({'seeds': result.seeds, 'medians': result.medians})

        execution_time = (datetime.now() - self.start_time).total_seconds()
        logger.info(f"Команда {args.command} выполнена за {execution_time:.2f} секунд")
        return 0

    @staticmethod
    def _emit(data):
        print(json.dumps(DataConverter.to_jsonable(data), sort_keys=True, indent=2,
                         default=DataConverter.json_default))


async def main(argv: Optional[List[str]] = None) -> int:
    """Точка входа в приложение"""
    args = build_parser().parse_args(argv)
    app = SimulatorApp()

    try:
        return await app.execute(args)
    except KeyboardInterrupt:
        logger.info("Получен сигнал прерывания")
        return 1
    except RewbError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Неожиданная ошибка: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
