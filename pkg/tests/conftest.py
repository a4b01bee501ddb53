import pytest
from hypothesis import HealthCheck, settings

from veriml.dataio import synth
from veriml.models.base import TrainConfig
from veriml.protocol.task import TaskSpec

settings.register_profile(
    "veriml", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("veriml")


def small_task(kind: str, l: int = 16, **over):
    """Desk-sized spec + dataset per algorithm (a few dozen iterations)."""
    if kind == "linreg":
        ds = synth("regression", 64, 4, 1, l)
        spec = TaskSpec("linreg", TrainConfig(batch_size=4, frac_bits=l), {"d": 4}, ds.digest, interval=5)
    elif kind in ("logreg", "svm"):
        ds = synth("binary", 64, 4, 1, l)
        spec = TaskSpec(kind, TrainConfig(batch_size=4, frac_bits=l), {"d": 4}, ds.digest, interval=5)
    elif kind == "kmeans":
        ds = synth("blobs", 64, 3, 1, l, k=3)
        spec = TaskSpec("kmeans", TrainConfig(batch_size=4, frac_bits=l, k_clusters=3), {"d": 3},
                        ds.digest, interval=5)
    elif kind == "nn":
        ds = synth("multiclass", 32, 4, 1, l, k=2)
        spec = TaskSpec("nn", TrainConfig(batch_size=4, frac_bits=l, nn_layers=(3,)), {"layers": [4, 3, 2]},
                        ds.digest, interval=5)
    elif kind == "tree":
        ds = synth("multiclass", 60, 3, 1, l, k=2)
        spec = TaskSpec("tree", TrainConfig(frac_bits=l, max_depth=2, n_classes=2, k_bins=3), {"d": 3},
                        ds.digest, interval=2)
    else:
        raise ValueError(kind)
    if over:
        spec = spec.with_(**over)
    return spec, ds


@pytest.fixture
def task():
    return small_task
