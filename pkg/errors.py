"""
Исключения инструментария.

Каждый класс наследует и от LfsgError, и от подходящего встроенного
исключения, поэтому ловить можно любое из них.
"""


class LfsgError(Exception):
    """Базовая ошибка."""


class InputError(LfsgError, ValueError):
    """Некорректные входные данные или конфигурация."""


class ParseError(InputError):
    """Файл не разбирается в объявленном формате."""


class EmptyMatrix(InputError):
    """Пустая матрица данных."""


class InvalidSpec(InputError):
    """Нарушены инварианты спецификации (синтетика, алгоритм, сетка)."""


class InsufficientClassSize(InputError):
    """В классе меньше объектов, чем требует разбиение."""


class DimensionMismatch(InputError):
    """Несогласованные размерности."""


class NonSquare(DimensionMismatch):
    """Ожидалась квадратная матрица."""


class ShapeMismatch(DimensionMismatch):
    """Размер вектора не совпадает с D_x * D_y."""


class LengthMismatch(DimensionMismatch):
    """Векторы меток разной длины."""


class EmptyCluster(InputError):
    """Кластер без единого объекта."""


class EmptySample(InputError):
    """Пустая выборка для статистического теста."""


class EmptyScores(InputError):
    """Пустой массив оценок."""


class SolveFailure(LfsgError, RuntimeError):
    """Не удалось решить симметричную положительно определённую систему."""


class EigFailure(LfsgError, RuntimeError):
    """Собственное разложение не сошлось."""


class NotImplementedKind(LfsgError, NotImplementedError):
    """Зарезервированный, но не реализованный тип алгоритма."""
