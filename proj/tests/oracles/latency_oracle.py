#!/usr/bin/env python3
"""Analytic bench ratios for the latency fixture in tests/acceptance.cpp.

All servers share one simulated device, so branch costs add up. Prefill of a
branch costs n*tp + kb*f (payload only when attached); each step costs s.

Run: python3 tests/oracles/latency_oracle.py
"""

n, h = 10, 1          # prompt tokens, think-tag tokens
tp, s, f = 2e-3, 10e-3, 2e-3  # s/token prefill, s/step, s/KB payload
kb = 20.0             # payload size in KB (20480 bytes)

base = n * tp + kb * f
stepwise = base + n * tp + (n + h) * tp
vcd_dup = base + base

print(f"prefill ratio stepwise        = {stepwise / base:.6f}")
print(f"prefill ratio vcd dup-omni    = {vcd_dup / base:.6f}")
print("generate ratio three-branch   = 3.000000 (three serialized steps vs one)")
