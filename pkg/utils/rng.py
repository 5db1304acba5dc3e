"""
Детерминированные счетчиковые потоки случайных чисел

Каждый поток задается ключом (master seed, тег назначения, счетчики), поэтому
значение для шага t и агента i не зависит от порядка вычислений и числа потоков.
"""
import zlib

import numpy as np

_SEED_MASK = 0xFFFFFFFFFFFFFFFF

# Теги назначений
TAG_GRAPH = 'graph'
TAG_BAD_SET = 'bad_set'
TAG_SPOOF = 'spoof'


def tag_key(tag: str) -> int:
    """Стабильный 32-битный ключ тега (встроенный hash() рандомизирован между процессами)"""
    return zlib.crc32(tag.encode('utf-8')) & 0xFFFFFFFF


def seed_sequence(seed: int, tag: str, *counters: int) -> np.random.SeedSequence:
    """SeedSequence для ключа (seed, tag, counters...)"""
    entropy = [int(seed) & _SEED_MASK, tag_key(tag)]
    entropy.extend(int(c) for c in counters)
    if any(c < 0 for c in entropy):
        raise ValueError(f"Счетчики потока должны быть неотрицательными: {entropy}")
    return np.random.SeedSequence(entropy)


def keyed_generator(seed: int, tag: str, *counters: int) -> np.random.Generator:
    """Генератор Philox (счетчиковый), однозначно определяемый ключом"""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, tag, *counters)))
