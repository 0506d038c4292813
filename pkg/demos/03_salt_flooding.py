"""Automatic salt flooding by relaxing a one-sided TV constraint.

Three inversions of the same data start from a smooth linear velocity
ramp that knows nothing about the salt:

* A: velocity bounds only,
* B: bounds plus a TV ball at 90% of the true model's TV,
* C: as B, plus a one-sided TV constraint that forbids most downward
  velocity drops at first and is relaxed pass by pass.

Run C first "floods" the salt downward, then lets the slow sediments
beneath it reappear as the one-sided radius grows.  The script prints the
model error after every pass and writes the final models.

Run:  python demos/03_salt_flooding.py [passes]   (default 8; about 4 to 5 minutes per run at 8 on one core)
"""
import sys
import time

from tvfwi.grid import model_error
from tvfwi.io import write_model
from tvfwi.scenarios import desk_plan, salt_desk
from tvfwi.workflow import run_inversion

passes = int(sys.argv[1]) if len(sys.argv) > 1 else 8
scene = salt_desk()
print(f"start model error {model_error(scene.m_start, scene.m_true):.4f}")

for run in ("A", "B", "C"):
    plan = desk_plan(run, scene, passes=passes)
    t0 = time.perf_counter()
    final, log = run_inversion(plan, scene.data, scene.m_start, scene.m_true)
    errs = " ".join(f"{e:.4f}" for e in log.pass_errors)
    print(f"run {run}: per-pass error {errs}  ({time.perf_counter() - t0:.0f} s)")
    write_model(f"salt_run_{run}.model", final)
