"""
Scenario files and run manifests.

A scenario is a JSON object with optional sections; anything left out takes
the dataclass defaults, anything unknown is rejected:

    {
      "scenario": "calibrated",
      "seed": 20240101,
      "technology": {"noise_sigma": 0.35},
      "experiment": {"rounds": 5, "marker_phi": 0.5},
      "population": {"n_subjects": 189},
      "equilibrium": {"true_abilities": [4, 5], "believed_abilities": [4, 5, 6], "phi_trues": [0.5]},
      "simulation": {"n_agents": 20, "rounds": 5, "mode": "stochastic"},
      "estimate": {"controls": ["male", "age", "white"]},
      "clustering": {"rounds": [1, 5], "k_max": 15, "criterion": "bic"}
    }

Every command records the scenario snapshot, seed, options and the sha256
of each artifact in a manifest so the run can be replayed and compared.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, Optional, Tuple

from errors import ConfigurationError
from model_core import Technology
from protocol import ExperimentConfig, PopulationSpec, from_mapping

TOOL_VERSION = "0.3.0"
SECTIONS = ("scenario", "seed", "technology", "experiment", "population", "equilibrium",
            "simulation", "estimate", "clustering")
MODES = ("deterministic", "stochastic")
GMM_INSTRUMENTS = ("lag_effort", "lag2_dep")


def _tuple_of(values, cast, label: str) -> tuple:
    if isinstance(values, (str, bytes)) or not hasattr(values, "__iter__"):
        raise ConfigurationError(f"{label} must be a list")
    try:
        return tuple(cast(v) for v in values)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"{label}: {e}")


@dataclass(frozen=True)
class EquilibriumSettings:
    true_abilities: Tuple[float, ...] = (4.0, 5.0)
    believed_abilities: Tuple[float, ...] = (4.0, 5.0, 6.0)
    phi_trues: Tuple[float, ...] = (0.5,)

    def __post_init__(self) -> None:
        for name in ("true_abilities", "believed_abilities", "phi_trues"):
            object.__setattr__(self, name, _tuple_of(getattr(self, name), float, f"equilibrium.{name}"))


@dataclass(frozen=True)
class SimulationSettings:
    n_agents: int = 20
    rounds: int = 5
    phi_true: float = 0.5
    true_ability: float = 5.0
    gap_range: Tuple[float, float] = (0.5, 2.0)
    prior_mean_range: Tuple[float, float] = (0.0, 1.0)
    prior_sd: float = 0.1
    mode: str = "stochastic"
    max_agents_plotted: int = 50

    def __post_init__(self) -> None:
        if self.n_agents < 0 or self.rounds < 1:
            raise ConfigurationError("simulation needs n_agents >= 0 and rounds >= 1")
        if not 0.0 < self.phi_true <= 1.0:
            raise ConfigurationError(f"simulation.phi_true must lie in (0, 1], got {self.phi_true}")
        if self.mode not in MODES:
            raise ConfigurationError(f"simulation.mode must be one of {MODES}, got '{self.mode}'")
        for name in ("gap_range", "prior_mean_range"):
            pair = _tuple_of(getattr(self, name), float, f"simulation.{name}")
            if len(pair) != 2 or pair[0] > pair[1]:
                raise ConfigurationError(f"simulation.{name} must be [low, high]")
            object.__setattr__(self, name, pair)


@dataclass(frozen=True)
class EstimateSettings:
    controls: Tuple[str, ...] = ("male", "age", "white")
    base_round: int = 1
    gmm_specs: Tuple[Tuple[str, ...], ...] = (("lag_effort",), ("lag2_dep",), ("lag_effort", "lag2_dep"))

    def __post_init__(self) -> None:
        object.__setattr__(self, "controls", _tuple_of(self.controls, str, "estimate.controls"))
        specs = tuple(_tuple_of(spec, str, "estimate.gmm_specs") for spec in
                      _tuple_of(self.gmm_specs, lambda s: s, "estimate.gmm_specs"))
        for spec in specs:
            if not spec or any(name not in GMM_INSTRUMENTS for name in spec):
                raise ConfigurationError(f"estimate.gmm_specs entries must be subsets of {GMM_INSTRUMENTS}")
        object.__setattr__(self, "gmm_specs", specs)


@dataclass(frozen=True)
class ClusteringSettings:
    rounds: Tuple[int, int] = (1, 5)
    columns: Tuple[str, str] = ("mark", "phi_hat")
    overconfident_only: bool = True
    k_min: int = 1
    k_max: int = 15
    criterion: str = "bic"
    n_init: int = 10
    scale_dim: int = 1
    scale_factor: float = 10.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rounds", _tuple_of(self.rounds, int, "clustering.rounds"))
        object.__setattr__(self, "columns", _tuple_of(self.columns, str, "clustering.columns"))
        if len(self.rounds) != 2 or len(self.columns) != 2:
            raise ConfigurationError("clustering.rounds and clustering.columns need exactly two entries")
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigurationError("clustering needs 1 <= k_min <= k_max")
        if self.criterion not in ("bic", "aic"):
            raise ConfigurationError(f"clustering.criterion must be bic or aic, got '{self.criterion}'")
        if self.n_init < 1 or self.scale_factor <= 0 or self.scale_dim not in (0, 1):
            raise ConfigurationError("clustering needs n_init >= 1, scale_factor > 0 and scale_dim in {0, 1}")

    @property
    def k_range(self) -> Tuple[int, ...]:
        return tuple(range(self.k_min, self.k_max + 1))


@dataclass(frozen=True)
class Scenario:
    name: str = "default"
    seed: int = 0
    technology: Technology = field(default_factory=Technology)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    population: PopulationSpec = field(default_factory=PopulationSpec)
    equilibrium: EquilibriumSettings = field(default_factory=EquilibriumSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    estimate: EstimateSettings = field(default_factory=EstimateSettings)
    clustering: ClusteringSettings = field(default_factory=ClusteringSettings)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scenario":
        if not isinstance(data, dict):
            raise ConfigurationError("scenario must be a JSON object")
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"Unknown scenario sections: {', '.join(unknown)}")
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        return cls(
            name=str(data.get("scenario", "default")),
            seed=seed,
            technology=from_mapping(Technology, data.get("technology"), "technology"),
            experiment=ExperimentConfig.from_dict(data.get("experiment")),
            population=PopulationSpec.from_dict(data.get("population")),
            equilibrium=from_mapping(EquilibriumSettings, data.get("equilibrium"), "equilibrium"),
            simulation=from_mapping(SimulationSettings, data.get("simulation"), "simulation"),
            estimate=from_mapping(EstimateSettings, data.get("estimate"), "estimate"),
            clustering=from_mapping(ClusteringSettings, data.get("clustering"), "clustering"),
        )

    def with_seed(self, seed: Optional[int]) -> "Scenario":
        if seed is None:
            return self
        return Scenario.from_dict({**self.snapshot(), "seed": seed})

    def snapshot(self) -> Dict[str, Any]:
        """JSON-safe dict that ``from_dict`` turns back into this scenario."""
        return json.loads(json.dumps({
            "scenario": self.name,
            "seed": self.seed,
            "technology": asdict(self.technology),
            "experiment": self.experiment.snapshot(),
            "population": self.population.snapshot(),
            "equilibrium": asdict(self.equilibrium),
            "simulation": asdict(self.simulation),
            "estimate": asdict(self.estimate),
            "clustering": asdict(self.clustering),
        }))


def load_scenario(path: Optional[str]) -> Scenario:
    """Scenario from a JSON file; defaults when ``path`` is None."""
    if path is None:
        return Scenario()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Scenario file '{path}' not found")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON format in '{path}': {e}")
    return Scenario.from_dict(data)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    scenario: str
    config: Dict[str, Any]
    seed: int
    options: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    tool_version: str = TOOL_VERSION
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))

    def record(self, out_dir: str, path: str) -> None:
        """Add an artifact, keyed by its path relative to ``out_dir``."""
        self.artifacts[os.path.relpath(path, out_dir).replace(os.sep, "/")] = sha256_file(path)

    def record_input(self, path: str) -> None:
        self.inputs[os.path.abspath(path)] = sha256_file(path)

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, f"manifest_{self.command}.json")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(asdict(self), f, ensure_ascii=False, indent=2, sort_keys=True)
        return path

    @classmethod
    def read(cls, path: str) -> "RunManifest":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigurationError(f"Manifest '{path}' not found")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON format in manifest '{path}': {e}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigurationError(f"Manifest '{path}' is malformed: {e}")
