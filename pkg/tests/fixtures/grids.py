"""
Small experiment registries for harness and CLI tests
"""
from pathlib import Path

SMALL_REGISTRY = """
grids:
  tiny:
    description: "two holding costs on a ten-server system"
    scenario:
      lambda: 1.9
      mu: 0.25
      nu: "1/15"
      servers: 10
      p_l: 0.1
      p_u: 0.2
      h: 0.5
      r: 1.0
      cost: {type: quadratic, M: 0.5}
      simulation: {warmup: 50, batches: 10, batch_length: 50}
    sweep:
      h: [0.25, 0.5]
    initial_states: [[12, 8]]
    horizon: 10
    longrun: true
    benchmarks: [equilibrium]
    reps: 4
    seed: 7

  tiny_waves:
    scenario:
      lambda: 1.9
      mu: 0.25
      nu: "1/15"
      servers: 10
      p_l: 0.1
      p_u: 0.2
      h: 0.5
      r: 1.0
      cost: {type: quadratic, M: 0.5}
      simulation: {warmup: 10, batches: 10, batch_length: 3}
    ks: [0.0, 0.5]
    fs: [7]
    benchmarks: [equilibrium]
    seed: 8

  broken:
    scenario:
      lambda: 1.9
    colour: red
"""


def write_registry(directory: Path) -> Path:
    path = Path(directory) / "grids.yaml"
    path.write_text(SMALL_REGISTRY)
    return path
