"""
Permet d'importer facilement les learners depuis le sous-package models.
"""
from .base import BaseForecaster
from .arima import ArimaForecaster
from .stl import StlForecaster
from .lstsvr import LsTsvrForecaster

# Registre centralisé des learners de l'ensemble
LEARNER_MAP = {
    'arima': ArimaForecaster,
    'stl': StlForecaster,
    'lstsvr': LsTsvrForecaster,
}


def get_learner(name: str, **kwargs) -> BaseForecaster:
    """
    Factory pour obtenir une instance de learner par son nom.

    Args:
        name (str): nom du learner ('arima', 'stl', 'lstsvr')
        **kwargs: hyperparamètres à passer au learner

    Returns:
        BaseForecaster: instance du learner

    Raises:
        ValueError: si le nom du learner n'est pas reconnu
    """
    if name not in LEARNER_MAP:
        raise ValueError(f"Learner inconnu: {name}. Disponibles: {list(LEARNER_MAP.keys())}")
    return LEARNER_MAP[name](**kwargs)
