"""
Time-sampled state sequences and the checkpoint format.

A checkpoint is a NumPy ``.npz`` archive with these members:

``format``       0-d string, always ``"hydrolab-trajectory"``
``version``      0-d int, currently 1
``kind``         0-d string: ``hydrostatic``, ``scaled`` or ``difference``
``dims``         int array (n1, n2, n3)
``axis_roles``   string array, e.g. ["h", "h", "v"]
``components``   string array naming the stored components
``times``        float array (nt,)
``dt``           0-d float, storage step
``epsilon``      0-d float, NaN when not applicable
``coeffs``       complex128 array (nt, ncomp, n1, n2, n3) of Fourier coefficients
``meta``         0-d string holding a JSON object of solver metadata
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import Grid

FORMAT_TAG = "hydrolab-trajectory"
FORMAT_VERSION = 1

KIND_COMPONENTS = {
    "hydrostatic": ("v1", "v2", "w"),
    "scaled": ("v1", "v2", "eps_w"),
    "difference": ("V1", "V2", "eps_W"),
}


@dataclass(frozen=True)
class HydroState:
    grid: Grid
    v: np.ndarray  # (2, *dims) grid values
    w: np.ndarray
    time: float


@dataclass(frozen=True)
class ScaledState:
    grid: Grid
    v_eps: np.ndarray
    w_eps: np.ndarray
    epsilon: float
    time: float

    @property
    def u_tilde(self) -> np.ndarray:
        return np.concatenate([self.v_eps, (self.epsilon * self.w_eps)[None]])


@dataclass(frozen=True)
class DifferenceState:
    grid: Grid
    V: np.ndarray
    eW: np.ndarray
    epsilon: float
    time: float


@dataclass(frozen=True)
class Trajectory:
    """
    Uniformly sampled states stored as spectral coefficients.

    ``coeffs[i]`` has shape (3, *grid.dims); the meaning of the three
    components is fixed by ``kind`` (see ``KIND_COMPONENTS``).
    """

    grid: Grid
    kind: str
    times: np.ndarray
    coeffs: np.ndarray
    dt: float
    epsilon: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KIND_COMPONENTS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        times = np.asarray(self.times, dtype=np.float64)
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape[2:] != self.grid.dims or coeffs.shape[1] != 3 or coeffs.shape[0] != times.size:
            raise ValueError("coeffs must have shape (nt, 3, *grid.dims)")
        if times.size > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(steps - self.dt)) > 1e-9 * max(1.0, abs(self.dt)):
                raise ValueError("times must be uniformly spaced by dt")
        times.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coeffs", coeffs)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def components(self) -> tuple[str, ...]:
        return KIND_COMPONENTS[self.kind]

    def values(self, i: int) -> np.ndarray:
        """Grid values (3, *dims) of sample i."""
        return self.grid.ifft(self.coeffs[i])

    def state(self, i: int):
        vals = self.values(i)
        t = float(self.times[i])
        if self.kind == "hydrostatic":
            return HydroState(self.grid, vals[:2], vals[2], t)
        eps = float(self.epsilon)
        if self.kind == "scaled":
            return ScaledState(self.grid, vals[:2], vals[2] / eps, eps, t)
        return DifferenceState(self.grid, vals[:2], vals[2], eps, t)

    def scaled_by(self, lam: float) -> "Trajectory":
        return Trajectory(self.grid, self.kind, self.times, lam * self.coeffs, self.dt, self.epsilon, dict(self.meta))


def save_trajectory(traj: Trajectory, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    eps = np.nan if traj.epsilon is None else float(traj.epsilon)
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format=np.array(FORMAT_TAG),
            version=np.array(FORMAT_VERSION),
            kind=np.array(traj.kind),
            dims=np.array(traj.grid.dims, dtype=np.int64),
            axis_roles=np.array(traj.grid.axis_roles),
            components=np.array(traj.components),
            times=traj.times,
            dt=np.array(float(traj.dt)),
            epsilon=np.array(eps),
            coeffs=traj.coeffs,
            meta=np.array(json.dumps(traj.meta, sort_keys=True)),
        )
    return path


def load_trajectory(path: str | Path) -> Trajectory:
    with np.load(Path(path), allow_pickle=False) as data:
        if str(data["format"]) != FORMAT_TAG:
            raise ValueError(f"{path} is not a trajectory checkpoint")
        if int(data["version"]) != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(data['version'])}")
        grid = Grid(tuple(int(n) for n in data["dims"]), tuple(str(r) for r in data["axis_roles"]))
        eps = float(data["epsilon"])
        return Trajectory(
            grid=grid,
            kind=str(data["kind"]),
            times=data["times"],
            coeffs=data["coeffs"],
            dt=float(data["dt"]),
            epsilon=None if np.isnan(eps) else eps,
            meta=json.loads(str(data["meta"])),
        )
