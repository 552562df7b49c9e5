"""NK echo state network: fixed random reservoir, probe filter and masked outputs.

Inputs feed a sparse tanh reservoir; every probe-filter neuron is a random
projection of the reservoir; output ``i`` reads the ``K+1`` probe neurons in
row ``i`` of the mask table, each gated by one bit of the selection vector.
No weight is ever changed after construction.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dynamics import SuccessDomain

FORMAT_TAG = "nkesn.network/1"


class Neighborhood(str, enum.Enum):
    ADJACENT = "adjacent"
    RANDOM = "random"


@dataclass(frozen=True)
class NetworkConfig:
    n_outputs: int = 20
    k: int = 3
    reservoir_size: int = 60
    density_alpha: float = 0.10
    weight_range: float = 0.6
    spectral_radius: float = 0.95
    neighborhood: Neighborhood = Neighborhood.ADJACENT
    n_inputs: int = 3
    seed: int = 0
    probe_density: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "neighborhood", Neighborhood(self.neighborhood))
        if self.k < 0 or not 0 < self.k + 1 <= self.n_outputs:
            raise ValueError(f"need 0 < K+1 <= N, got N={self.n_outputs}, K={self.k}")
        if self.reservoir_size < 1:
            raise ValueError("reservoir_size must be >= 1")
        if self.n_inputs < 1:
            raise ValueError("n_inputs must be >= 1")
        if not 0 < self.density_alpha <= 1:
            raise ValueError("density_alpha must lie in (0, 1]")
        if not 0 < self.probe_density <= 1:
            raise ValueError("probe_density must lie in (0, 1]")
        if not self.spectral_radius > 0:
            raise ValueError("spectral_radius must be positive")
        if not self.weight_range > 0:
            raise ValueError("weight_range must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["neighborhood"] = self.neighborhood.value
        return d


class MaskTable:
    """Row ``i`` lists the ``K+1`` probe indices feeding output ``i``.

    Rows are stored sorted ascending; this fixes the sub-pattern bit order
    (bit ``j`` of a pattern index is the ``j``-th smallest probe index).
    ``anchor[i]`` is the position of probe ``i`` inside row ``i``.
    """

    def __init__(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] < 1:
            raise ValueError("mask rows must form an N x (K+1) array")
        n = rows.shape[0]
        rows = np.sort(rows, axis=1)
        for i, row in enumerate(rows):
            if row[0] < 0 or row[-1] >= n:
                raise ValueError(f"mask row {i} has indices outside [0, {n})")
            if np.any(np.diff(row) == 0):
                raise ValueError(f"mask row {i} has repeated indices")
            if i not in row:
                raise ValueError(f"mask row {i} does not contain its own index")
        rows.flags.writeable = False
        self.rows = rows
        self.anchor = np.array([int(np.searchsorted(row, i)) for i, row in enumerate(rows)])

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def arity(self) -> int:
        return self.rows.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.rows[i]

    def __eq__(self, other):
        return isinstance(other, MaskTable) and np.array_equal(self.rows, other.rows)

    def indicator(self, i: int) -> np.ndarray:
        ind = np.zeros(self.n, dtype=np.int64)
        ind[self.rows[i]] = 1
        return ind

    def is_adjacent(self) -> bool:
        n, a = self.rows.shape
        return all(np.array_equal(self.rows[i], np.sort((i + np.arange(a)) % n)) for i in range(n))

    @classmethod
    def adjacent(cls, n: int, k: int) -> "MaskTable":
        return cls([(i + np.arange(k + 1)) % n for i in range(n)])

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator) -> "MaskTable":
        rows = []
        for i in range(n):
            others = np.delete(np.arange(n), i)
            rows.append(np.concatenate(([i], rng.choice(others, size=k, replace=False))))
        return cls(rows)


def spectral_radius(matrix) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(matrix, dtype=np.float64)))))


def scale_spectral_radius(matrix, target: float) -> np.ndarray:
    """Rescale ``matrix`` so its largest eigenvalue magnitude equals ``target``."""
    matrix = np.asarray(matrix, dtype=np.float64)
    rho = spectral_radius(matrix)
    if not rho > 1e-12:
        raise ValueError("matrix has spectral radius 0 and cannot be normalized")
    return matrix * (target / rho)


def scale_input(x_c: float, theta1: float, theta2: float,
                limits: SuccessDomain = SuccessDomain()) -> np.ndarray:
    return np.array([x_c / limits.x_limit, theta1 / limits.angle_limit,
                     theta2 / limits.angle_limit], dtype=np.float64)


def _frozen(arr) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


class EchoNetwork:
    """All fixed weights of one network plus its mutable reservoir state.

    Attributes:
        w_in: ``(reservoir_size, n_inputs)`` input weights.
        w_res: ``(reservoir_size, reservoir_size)`` recurrent weights; row ``j``
            holds the fan-in of neuron ``j``.
        w_probe: ``(N, reservoir_size)`` reservoir to probe-filter weights.
        w_out: ``(N, K+1)``; ``w_out[i, j]`` is the weight from probe
            ``masks[i][j]`` to output ``i``.
        res_threshold, probe_threshold: biases of reservoir and probe neurons.
    """

    def __init__(self, config: NetworkConfig, w_in, w_res, res_threshold, w_probe,
                 probe_threshold, w_out, masks: MaskTable):
        self.config = config
        self.w_in = _frozen(w_in)
        self.w_res = _frozen(w_res)
        self.res_threshold = _frozen(res_threshold)
        self.w_probe = _frozen(w_probe)
        self.probe_threshold = _frozen(probe_threshold)
        self.w_out = _frozen(w_out)
        self.masks = masks
        r, n = config.reservoir_size, config.n_outputs
        expected = {"w_in": (r, config.n_inputs), "w_res": (r, r), "res_threshold": (r,),
                    "w_probe": (n, r), "probe_threshold": (n,), "w_out": (n, config.k + 1)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if masks.rows.shape != (n, config.k + 1):
            raise ValueError("mask table does not match (N, K+1)")
        self._build_sparse()
        self.reservoir_state = np.zeros(r)
        self.probe_state = np.zeros(n)
        self._scratch = np.empty(r)

    def _build_sparse(self):
        ptr = [0]
        cols, vals = [], []
        for row in self.w_res:
            nz = np.nonzero(row)[0]
            cols.extend(nz)
            vals.extend(row[nz])
            ptr.append(len(cols))
        self._res_ptr = np.array(ptr, dtype=np.int64)
        self._res_col = np.array(cols, dtype=np.int64)
        self._res_val = np.array(vals, dtype=np.float64)

    @property
    def n_outputs(self) -> int:
        return self.config.n_outputs

    def kernel_args(self) -> tuple:
        return (self.w_in, self._res_ptr, self._res_col, self._res_val, self.res_threshold,
                self.w_probe, self.probe_threshold, self.masks.rows, self.w_out)

    def reset_state(self) -> "EchoNetwork":
        self.reservoir_state[:] = 0.0
        self.probe_state[:] = 0.0
        return self

    def copy(self) -> "EchoNetwork":
        clone = object.__new__(EchoNetwork)
        clone.__dict__.update(self.__dict__)
        clone.reservoir_state = self.reservoir_state.copy()
        clone.probe_state = self.probe_state.copy()
        clone._scratch = np.empty_like(self._scratch)
        return clone

    def step(self, u, x) -> np.ndarray:
        """Advance the reservoir one step on input ``u``; return all N outputs."""
        u = np.asarray(u, dtype=np.float64)
        bits = _as_bits(x, self.n_outputs)
        if u.shape != (self.config.n_inputs,):
            raise ValueError(f"input must have length {self.config.n_inputs}")
        y = np.empty(self.n_outputs)
        _kernels.network_step(u, bits, self.reservoir_state, self._scratch, self.probe_state, y,
                              *self.kernel_args())
        return y

    def fully_connected_outputs(self) -> np.ndarray:
        """Dense ``(N, N)`` output weights; entry ``[q, i]`` is zero unless ``q`` feeds ``i``."""
        dense = np.zeros((self.n_outputs, self.n_outputs))
        for i, row in enumerate(self.masks.rows):
            dense[row, i] = self.w_out[i]
        return dense

    def weight_arrays(self) -> dict:
        return {"w_in": self.w_in, "w_res": self.w_res, "res_threshold": self.res_threshold,
                "w_probe": self.w_probe, "probe_threshold": self.probe_threshold,
                "w_out": self.w_out}

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "config": self.config.to_dict(),
            "arrays": {name: _encode(arr) for name, arr in self.weight_arrays().items()},
            "masks": _encode(self.masks.rows),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EchoNetwork":
        if doc.get("format") != FORMAT_TAG:
            raise ValueError(f"not a network document (format={doc.get('format')!r})")
        config = NetworkConfig(**doc["config"])
        arrays = {name: _decode(v) for name, v in doc["arrays"].items()}
        return cls(config, masks=MaskTable(_decode(doc["masks"]).astype(np.int64)), **arrays)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "EchoNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _encode(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    data = arr.ravel().tolist()
    return {"shape": list(arr.shape), "data": data}


def _decode(doc: dict) -> np.ndarray:
    return np.array(doc["data"], dtype=np.float64).reshape(doc["shape"])


def _as_bits(x, n: int) -> np.ndarray:
    bits = np.asarray(x, dtype=np.int8).ravel()
    if bits.shape != (n,):
        raise ValueError(f"bit vector must have length {n}, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bit vector entries must be 0 or 1")
    return bits


def _sparse_reservoir(rng: np.random.Generator, size: int, density: float, w: float) -> np.ndarray:
    fan_in = max(1, int(math.floor(density * size + 0.5)))
    m = np.zeros((size, size))
    for j in range(size):
        cols = np.sort(rng.choice(size, size=fan_in, replace=False))
        m[j, cols] = rng.uniform(-w, w, size=fan_in)
    return m


def build_network(config: NetworkConfig) -> EchoNetwork:
    """Draw every weight of a network from ``config.seed``.

    Independent random streams feed the reservoir, the probe filter, the output
    weights and the random mask partners, so changing ``K`` or the neighborhood
    leaves the reservoir and probe weights untouched.  Output weights are drawn
    as a dense ``N x N`` matrix and the masked entries are kept.
    """
    res_ss, probe_ss, out_ss, mask_ss = np.random.SeedSequence(config.seed).spawn(4)
    rng_res = np.random.default_rng(res_ss)
    rng_probe = np.random.default_rng(probe_ss)
    rng_out = np.random.default_rng(out_ss)
    rng_mask = np.random.default_rng(mask_ss)
    w = config.weight_range
    r, n = config.reservoir_size, config.n_outputs

    w_in = rng_res.uniform(-w, w, size=(r, config.n_inputs))
    w_res = scale_spectral_radius(_sparse_reservoir(rng_res, r, config.density_alpha, w),
                                  config.spectral_radius)
    res_threshold = rng_res.uniform(-w, w, size=r)

    w_probe = rng_probe.uniform(-w, w, size=(n, r))
    if config.probe_density < 1.0:
        keep = max(1, int(math.floor(config.probe_density * r + 0.5)))
        gate = np.zeros((n, r))
        for q in range(n):
            gate[q, rng_probe.choice(r, size=keep, replace=False)] = 1.0
        w_probe = w_probe * gate
    probe_threshold = rng_probe.uniform(-w, w, size=n)

    if config.neighborhood is Neighborhood.ADJACENT:
        masks = MaskTable.adjacent(n, config.k)
    else:
        masks = MaskTable.random(n, config.k, rng_mask)

    dense_out = rng_out.uniform(-w, w, size=(n, n))
    w_out = np.array([dense_out[masks.rows[i], i] for i in range(n)])

    return EchoNetwork(config, w_in, w_res, res_threshold, w_probe, probe_threshold, w_out, masks)

