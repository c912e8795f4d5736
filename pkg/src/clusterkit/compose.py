"""Module registry and the five algorithm presets."""

from __future__ import annotations

from . import chd, it, jd
from .core import AlgorithmComposition, Params

CHD_MODULES = {
    "prob": chd.ProbChd,
    "attr": chd.AttrChd,
    "leach": chd.LeachChd,
    "tcca": chd.TccaChd,
    "maxmind": chd.MaxMinDChd,
}

JD_MODULES = {
    "bfs": jd.BfsJd,
    "dfs": jd.DfsJd,
    "lca": jd.LcaJd,
    "leach": jd.LeachJd,
    "tcca": jd.TccaJd,
    "moca": jd.MocaJd,
    "maxmind": jd.MaxMindJd,
}

IT_MODULES = {
    "norm": it.NormIt,
    "moca": it.MocaIt,
    "maxmind": it.MaxMindIt,
}

PRESETS = {
    "lca": AlgorithmComposition("prob", "lca", "norm", Params(p=0.15, k=2), "lca"),
    "leach": AlgorithmComposition("leach", "leach", "norm", Params(P_desired=0.2, k=1), "leach"),
    "tcca": AlgorithmComposition("tcca", "tcca", "norm", Params(p=0.15, k=2), "tcca"),
    "moca": AlgorithmComposition("prob", "moca", "moca", Params(p=0.15, k=2), "moca"),
    "maxmind": AlgorithmComposition("maxmind", "maxmind", "maxmind", Params(d=2), "maxmind"),
}


def preset(name: str, **params) -> AlgorithmComposition:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return base.with_params(**params) if params else base


def validate(composition: AlgorithmComposition) -> None:
    for kind, table, choice in (("chd", CHD_MODULES, composition.chd),
                                ("jd", JD_MODULES, composition.jd),
                                ("it", IT_MODULES, composition.it)):
        if choice not in table:
            raise ValueError(f"unknown {kind} module {choice!r}; choose from {sorted(table)}")
    if composition.jd == "maxmind" and composition.chd != "maxmind":
        raise ValueError("the maxmind join rule needs the maxmind head election")
    if composition.jd == "moca" and composition.it != "moca":
        raise ValueError("the moca join rule needs the moca iterator")


def instantiate(composition: AlgorithmComposition, cc) -> tuple:
    validate(composition)
    # the iterator goes first: join modules consult it while resetting
    iterator = IT_MODULES[composition.it](cc)
    cc.it = iterator
    return (CHD_MODULES[composition.chd](cc), JD_MODULES[composition.jd](cc), iterator)
