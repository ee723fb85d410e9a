"""Plain-text serialization of GLMB densities.

Format (whitespace separated, one record per line, ``#`` starts a comment)::

    glmb-density 1
    state_dim <d>
    hypervolume_unit <K>
    component <history> <log_weight> <n_labels>
    label <birth_time> <index> <n_gaussians>
    gaussian <weight> <mean_1..mean_d> <cov_11 cov_12 .. cov_dd>

``label`` records follow their ``component`` record, and ``gaussian``
records follow their ``label`` record. Covariances are row-major. Floats are
written with 17 significant digits so a round trip is lossless.
"""

from __future__ import annotations

from typing import Iterator, List, TextIO

import numpy as np

from .mixture import GaussianMixture
from .rfs import GlmbComponent, GlmbDensity, Label

MAGIC = "glmb-density"
VERSION = 1


def _f(x: float) -> str:
    return format(float(x), ".17g")


def dumps(density: GlmbDensity) -> str:
    lines = [f"{MAGIC} {VERSION}", f"state_dim {density.state_dim}",
             f"hypervolume_unit {_f(density.hypervolume_unit)}"]
    for c in density.components:
        lines.append(f"component {c.history} {_f(c.log_weight)} {len(c.labels)}")
        for l in c.labels:
            gm = c.densities[l]
            lines.append(f"label {l.birth_time} {l.index} {gm.size}")
            for w, m, P in zip(gm.weights, gm.means, gm.covs):
                nums = [w, *m, *P.ravel()]
                lines.append("gaussian " + " ".join(_f(v) for v in nums))
    return "\n".join(lines) + "\n"


def _records(text: str) -> Iterator[List[str]]:
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line.split()


def loads(text: str) -> GlmbDensity:
    recs = list(_records(text))
    if not recs or recs[0][0] != MAGIC:
        raise ValueError("not a glmb-density document")
    if int(recs[0][1]) != VERSION:
        raise ValueError(f"unsupported glmb-density version {recs[0][1]}")
    header = {r[0]: r[1] for r in recs[1:3]}
    d = int(header["state_dim"])
    K = float(header["hypervolume_unit"])
    pos = 3
    comps = []
    # shared mixtures are re-shared on load when their text is identical
    pool = {}

    def take(kind):
        nonlocal pos
        if pos >= len(recs) or recs[pos][0] != kind:
            found = recs[pos][0] if pos < len(recs) else "end of input"
            raise ValueError(f"expected {kind!r} record, found {found!r}")
        rec = recs[pos]
        pos += 1
        return rec[1:]

    while pos < len(recs):
        hist, lw, n_labels = take("component")
        dens = {}
        for _ in range(int(n_labels)):
            bt, idx, n_g = take("label")
            rows = [take("gaussian") for _ in range(int(n_g))]
            key = tuple(tuple(r) for r in rows)
            gm = pool.get(key)
            if gm is None:
                arr = np.array([[float(v) for v in r] for r in rows])
                if arr.shape[1] != 1 + d + d * d:
                    raise ValueError("gaussian record has the wrong length")
                gm = GaussianMixture(arr[:, 0], arr[:, 1:1 + d],
                                     arr[:, 1 + d:].reshape(-1, d, d))
                pool[key] = gm
            dens[Label(int(bt), int(idx))] = gm
        comps.append(GlmbComponent(int(hist), tuple(dens), float(lw), dens))
    return GlmbDensity(tuple(comps), d, K)


def dump(density: GlmbDensity, fh: TextIO) -> None:
    fh.write(dumps(density))


def load(fh: TextIO) -> GlmbDensity:
    return loads(fh.read())
