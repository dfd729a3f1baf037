"""Detecting a tampered machine by sending a file of known size through every machine.

Run: python3 demos/calibration.py
"""

import dataclasses

from votewire.simulate import (CalibrationModel, calibration_run, generate_scenario, paper_2004)

config = paper_2004(seed=7, scale=0.02)
ds = generate_scenario(config)
suspect = sorted(ds.truth)[3]

config = dataclasses.replace(config, calibration=CalibrationModel(noise_sd=40.0,
                                                                  injected={suspect: 2_000.0}))
report = calibration_run(config, file_size=12_000, repetitions=10, dataset=ds)
print(f"{len(report.rows)} machines, median overhead {report.median_overhead:.0f} bytes, "
      f"fleet sd {report.sigma:.0f}")
print(f"injected: {suspect}; flagged: {', '.join(report.flagged) or 'none'}")
