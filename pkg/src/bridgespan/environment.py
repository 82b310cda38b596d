"""Material x span gridworld whose reward is the negative unit-area cost.

Rows are load-bearing materials (0 concrete, 1 composite, 2 steel with the
default materials), columns are spans ``min_span, min_span + step_length,
..., max_span``.  State index is ``row * num_columns + col``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from bridgespan.cost_model import DEFAULT_MATERIALS, MaterialCostParams, unit_area_cost

BLACK = (0, 0, 0)
GRAY = (128, 128, 128)
RED = (255, 0, 0)
BLUE = (0, 0, 255)
GREEN = (0, 128, 0)


class Action(enum.IntEnum):
    NOOP = 0
    UP = 1
    DOWN = 2
    LEFT = 3
    RIGHT = 4


# (row delta, column delta); a column is one step_length of span
DISPLACEMENT = {
    Action.NOOP: (0, 0),
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


@dataclass(frozen=True)
class EnvConfig:
    min_span: int = 10
    max_span: int = 800
    step_length: int = 10
    max_steps: int = 200
    cell_pixels: int = 16
    materials: tuple[MaterialCostParams, ...] = field(default=DEFAULT_MATERIALS)

    def __post_init__(self) -> None:
        if self.step_length <= 0:
            raise ValueError("step_length must be > 0")
        if not 0 < self.min_span < self.max_span:
            raise ValueError("need 0 < min_span < max_span")
        if (self.max_span - self.min_span) % self.step_length:
            raise ValueError("max_span - min_span must be divisible by step_length")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.cell_pixels < 1:
            raise ValueError("cell_pixels must be >= 1")
        if len(self.materials) < 1:
            raise ValueError("at least one material is required")
        object.__setattr__(self, "materials", tuple(self.materials))

    @property
    def num_materials(self) -> int:
        return len(self.materials)

    @property
    def num_columns(self) -> int:
        return (self.max_span - self.min_span) // self.step_length + 1

    @property
    def num_states(self) -> int:
        return self.num_materials * self.num_columns

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.cell_pixels * self.num_materials, self.cell_pixels * self.num_columns, 3)

    def spans(self) -> np.ndarray:
        return np.arange(self.min_span, self.max_span + self.step_length, self.step_length)


class StepResult(NamedTuple):
    next_state: int
    reward: float
    done: bool
    truncated: bool
    info: dict


def cost_table(config: EnvConfig) -> np.ndarray:
    """Unit-area cost of every cell, shape ``(num_materials, num_columns)``."""
    return np.array(
        [[unit_area_cost(p, float(x)) for x in config.spans()] for p in config.materials]
    )


class BridgeSpanEnv:
    """Deterministic gridworld; episodes end only on the step budget.

    Moves that would leave the grid keep the old coordinate on that axis.
    """

    def __init__(self, config: EnvConfig | None = None, seed: int | None = None):
        self.config = config or EnvConfig()
        self.num_columns = self.config.num_columns
        self.num_states = self.config.num_states
        self.num_actions = len(Action)
        self._costs = cost_table(self.config)
        self._rng = np.random.default_rng(seed)
        self.state = 0
        self.step_num = 0
        self.done = True
        self._transitions = self._build_transitions()

    # indexing -----------------------------------------------------------------

    def state_to_grid(self, index: int) -> tuple[int, int]:
        """Return ``(row, span)`` for a state index."""
        index = int(index)
        if not 0 <= index < self.num_states:
            raise ValueError(f"state index {index} outside [0, {self.num_states})")
        row, col = divmod(index, self.num_columns)
        return row, self.config.min_span + self.config.step_length * col

    def grid_to_state(self, row: int, span: int) -> int:
        cfg = self.config
        if not 0 <= row < cfg.num_materials:
            raise ValueError(f"row {row} outside [0, {cfg.num_materials})")
        offset = span - cfg.min_span
        if offset % cfg.step_length or not cfg.min_span <= span <= cfg.max_span:
            raise ValueError(f"span {span} is not on the {cfg.step_length} m grid")
        return int(row) * self.num_columns + int(offset // cfg.step_length)

    def row_col(self, index: int) -> tuple[int, int]:
        self.state_to_grid(index)
        return divmod(int(index), self.num_columns)

    def cost(self, index: int) -> float:
        row, col = self.row_col(index)
        return float(self._costs[row, col])

    def _info(self, index: int) -> dict:
        row, span = self.state_to_grid(index)
        return {"row": row, "material": self.config.materials[row].name, "span": span}

    # dynamics -----------------------------------------------------------------

    def _move(self, index: int, action: int) -> int:
        row, col = divmod(index, self.num_columns)
        d_row, d_col = DISPLACEMENT[Action(action)]
        next_row, next_col = row + d_row, col + d_col
        if not 0 <= next_row < self.config.num_materials:
            next_row = row
        if not 0 <= next_col < self.num_columns:
            next_col = col
        return next_row * self.num_columns + next_col

    def _build_transitions(self) -> np.ndarray:
        return np.array(
            [[self._move(s, a) for a in Action] for s in range(self.num_states)], dtype=np.int64
        )

    def transition_table(self) -> tuple[np.ndarray, np.ndarray]:
        """``(next_state[s, a], reward[s, a])`` for the whole MDP."""
        next_state = self._transitions.copy()
        reward = -self._costs.ravel()[next_state]
        return next_state, reward

    def reset(self, seed: int | None = None) -> tuple[int, dict]:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.state = int(self._rng.integers(self.num_states))
        self.step_num = 0
        self.done = False
        return self.state, self._info(self.state)

    def reset_to(self, index: int) -> tuple[int, dict]:
        """Start an episode from a chosen state (policy tests)."""
        self.state_to_grid(index)
        self.state = int(index)
        self.step_num = 0
        self.done = False
        return self.state, self._info(self.state)

    def step(self, action: int) -> StepResult:
        if self.done:
            raise RuntimeError("episode is finished; call reset() first")
        if action not in Action._value2member_map_:
            raise ValueError(f"invalid action {action!r}")
        self.state = int(self._transitions[self.state, int(action)])
        row, col = divmod(self.state, self.num_columns)
        reward = -float(self._costs[row, col])
        self.step_num += 1
        self.done = self.step_num >= self.config.max_steps
        return StepResult(self.state, reward, self.done, False, self._info(self.state))

    def optimal_state(self) -> int:
        """Cheapest cell by exhaustive search; ties go to the lowest index."""
        return int(np.argmin(self._costs.ravel()))

    # rendering ----------------------------------------------------------------

    def _checkerboard(self) -> np.ndarray:
        cfg = self.config
        rows, cols = cfg.num_materials, self.num_columns
        parity = (np.add.outer(np.arange(rows), np.arange(cols)) % 2).astype(bool)
        cells = np.where(parity[..., None], np.array(GRAY, np.uint8), np.array(BLACK, np.uint8))
        px = cfg.cell_pixels
        return np.repeat(np.repeat(cells, px, axis=0), px, axis=1)

    def _paint(self, image: np.ndarray, index: int, color: tuple[int, int, int]) -> None:
        row, col = self.row_col(index)
        px = self.config.cell_pixels
        image[row * px : (row + 1) * px, col * px : (col + 1) * px] = color

    def render_state(self, index: int | None = None) -> np.ndarray:
        """RGB uint8 image with the agent's cell in red."""
        image = self._checkerboard()
        self._paint(image, self.state if index is None else index, RED)
        return image

    def render_trajectory(self, trace: Sequence[int]) -> np.ndarray:
        """Start red, visited cells blue, end point green (later colours win)."""
        if len(trace) == 0:
            raise ValueError("trajectory is empty")
        image = self._checkerboard()
        self._paint(image, trace[0], RED)
        for index in trace[1:-1]:
            self._paint(image, index, BLUE)
        self._paint(image, trace[-1], GREEN)
        return image

    def render_all(self) -> np.ndarray:
        """Rendered images of every state, shape ``(num_states, H, W, 3)``."""
        return np.stack([self.render_state(s) for s in range(self.num_states)])


def encode_ppm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError("expected an HxWx3 uint8 image")
    height, width = image.shape[:2]
    return f"P6\n{width} {height}\n255\n".encode("ascii") + np.ascontiguousarray(image).tobytes()


def write_ppm(image: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(encode_ppm(image))


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise ValueError(f"{path}: not a binary 8-bit PPM")
    width, height = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != width * height * 3:
        raise ValueError(f"{path}: expected {width * height * 3} pixel bytes, got {pixels.size}")
    return pixels.reshape(height, width, 3).copy()
