"""
returnctl Setup Script
Checks the environment and runs a quick end-to-end smoke test
"""

import sys
from pathlib import Path
import traceback

# Add project root to path
project_root = Path(__file__).resolve().parent
sys.path.insert(0, str(project_root))


def setup_returnctl():
    """Verify packages, configuration and the synthesis pipeline"""
    print("🚑 Setting up returnctl...")
    print("=" * 60)

    try:
        # Step 1: Packages
        print("\n📦 Step 1: Checking packages...")
        import numpy, scipy, pandas, simpy, yaml, pydantic, tabulate  # noqa: F401
        for module in (numpy, scipy, pandas, simpy, pydantic):
            print(f"   ✅ {module.__name__} {getattr(module, '__version__', '')}")

        # Step 2: Configuration
        print("\n⚙️  Step 2: Loading configuration...")
        from returnctl.config import settings
        from returnctl.experiments.harness import list_grids
        print(f"   ✅ Log level: {settings.log}")
        print(f"   ✅ Output directory: {settings.output_dir}")
        print(f"   ✅ Experiment grids: {', '.join(list_grids())}")

        # Step 3: Scenarios
        print("\n📂 Step 3: Validating scenario files...")
        from returnctl.core.scenario import load_scenario
        scenarios = sorted((project_root / "scenarios").glob("*.json"))
        for path in scenarios:
            scenario = load_scenario(path)
            print(f"   ✅ {path.name}: N={scenario.model.n}, cost={scenario.model.cost.form.value}")

        # Step 4: Pipeline
        print("\n🧪 Step 4: Synthesizing a policy...")
        from returnctl.core.equilibrium import solve_equilibrium
        from returnctl.core.fluid_policy import build_policy
        from returnctl.simulation.policies import build_intervention_policy
        from returnctl.simulation.runner import simulate

        model = load_scenario(project_root / "scenarios" / "quadratic.json").model
        solution = solve_equilibrium(model)
        print(f"   ✅ Equilibrium: p_inf={solution.p_inf:.4f}, J_inf={solution.J_inf:.4f}")
        policy = build_policy(model, solution, n_lines=200, n_anchors=40)
        print(f"   ✅ Fluid policy built in {policy.build_seconds:.2f}s, p(80, 60)={policy.query(80, 60):.4f}")

        scenario = load_scenario(project_root / "scenarios" / "quadratic.json")
        run = simulate(scenario, build_intervention_policy("fluid", model, solution, policy), (80, 60), 30.0, seed=1)
        print(f"   ✅ Simulated 30 days: total cost {run.total_cost:.2f}")

        print("\n" + "=" * 60)
        print("✨ returnctl Setup Complete!")
        print("\n💡 Usage:")
        print("   python -m returnctl solve-equilibrium scenarios/quadratic.json")
        print("   python -m returnctl policy-grid scenarios/quadratic.json --out policy.csv")
        print("   python -m returnctl run-grid cost_grid --jobs 8")

        return True

    except Exception as e:
        print("\n" + "=" * 60)
        print(f"❌ Error during setup: {e}")
        print("\n📋 Full traceback:")
        traceback.print_exc()
        print("\n" + "=" * 60)
        return False


if __name__ == "__main__":
    success = setup_returnctl()
    sys.exit(0 if success else 1)
