"""End-to-end harness tour: generate data, solve, compare, fit rates.

Everything here also works from the shell via the ``cpgd`` command with
the same config files; this script drives the same entry point in-process
so the artifacts can be inspected right after.
"""

from pathlib import Path

from cpgd.harness import main
from cpgd.solver import RunLog

work = Path("harness_demo")
work.mkdir(exist_ok=True)

# 1. synthesize a planted instance and store it in the binary matrix format
(work / "gen.txt").write_text(
    "m = 30\nn = 40\nr = 3\nseed = 4\nout = data\nformat = bin\n"
    "save_factors = true\n")
assert main(["gen-data", str(work / "gen.txt")]) == 0

# 2. a config that loads the stored matrix and runs both solvers
(work / "exp.txt").write_text(
    "problem = onmf\n"
    "onmf.data = data_X.bin\n"
    "onmf.rank = 3\n"
    "onmf.lambda = 1\n"
    "solver = both\n"
    "max_cycles = 600\n"
    "seed = 9\n"
    "rates_fit = true\n"
    "out_dir = out\n")
assert main(["check", str(work / "exp.txt")]) == 0
assert main(["solve", str(work / "exp.txt")]) == 0

# 3. load the emitted log and poke at it; overrides beat the file
log = RunLog.from_csv(work / "out" / "runlog_cpgd.csv")
print(f"\ncpgd log: {len(log)} cycles, final ortho error "
      f"{log.final.metrics['ortho_error']:.3e}")
print("summary.txt:")
print((work / "out" / "summary.txt").read_text())

assert main(["solve", str(work / "exp.txt"), "solver=cpgd",
             "max_cycles=40", "out_dir=out_short"]) == 0
short = RunLog.from_csv(work / "out_short" / "runlog_cpgd.csv")
print(f"override run stopped at {len(short)} cycles")

# 4. rate fitting straight from a log file
assert main(["rates", str(work / "out" / "runlog_cpgd.csv"),
             "--csv", str(work / "out" / "perk.csv")]) == 0
