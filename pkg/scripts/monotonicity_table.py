"""Print Renyi divergences across orders for a few fixed pairs.

The rows should be non-decreasing left to right, bracketed by KL and max.
"""
import argparse
from dataclasses import dataclass
from typing import Tuple

from rdpbridge.divergence import DivergenceOrder, renyi_divergence
from rdpbridge.measures import Categorical, IsotropicGaussian, ProductLaplace


@dataclass
class TableConfig:
    orders: Tuple[str, ...] = ("kl", "1.1", "1.5", "2", "4", "8", "32", "max")
    method: str = "auto"
    seed: int = 0


def pairs():
    yield "categorical", Categorical([0.7, 0.2, 0.1]), Categorical([0.3, 0.3, 0.4])
    yield "gaussian d=1", IsotropicGaussian([0.0], 1.0), IsotropicGaussian([1.0], 1.0)
    yield "laplace d=0.5", ProductLaplace([0.0], 1.0), ProductLaplace([0.5], 1.0)


def main(cfg: TableConfig):
    orders = [DivergenceOrder.parse(o) for o in cfg.orders]
    print(f"{'pair':<16}" + "".join(f"{o:>12}" for o in cfg.orders))
    for name, p, q in pairs():
        vals = [renyi_divergence(p, q, o, method=cfg.method, seed=cfg.seed).value for o in orders]
        print(f"{name:<16}" + "".join(f"{v:>12.6g}" for v in vals))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--method", default=TableConfig.method)
    ap.add_argument("--seed", type=int, default=TableConfig.seed)
    main(TableConfig(**vars(ap.parse_args())))
