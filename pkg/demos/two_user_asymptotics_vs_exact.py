"""
Asymptotic sum rate against exact enumeration
=============================================

The shipped two-user setup evaluated with uniform (no precoding)
transmit covariance.  At each SNR the asymptotic rate comes from the
replica-style fixed point; the reference is a Monte Carlo average of
the exactly enumerated joint-alphabet information over sampled
channels.  Runs in about a minute at this reduced sampling.
"""

import importlib.resources

import yaml

import macprecode as mp

cfg_text = (
    importlib.resources.files("macprecode")
    / "configs/twouser_weichselberger.yaml"
).read_text()
config = mp.config_from_dict(yaml.safe_load(cfg_text))
system = config.system

print("snr (dB)   asymptotic   exact MC    std err")
for snr in (-10.0, 0.0, 10.0, 20.0):
    powers = [mp.snr_to_power(snr, stats) for stats in config.users]
    precoders = mp.PrecoderSet(
        matrices=[mp.baseline_np(stats.n_tx, p) for stats, p in zip(config.users, powers)],
        powers=powers,
        weights=[1.0, 1.0],
    )
    asym = mp.wsr_objective(
        system, precoders, mp.SolveOptions(n_noise=2000, seed=3)
    ).value
    exact = mp.mc_exact_mi(system, precoders, (0, 1), 300, 200, seed=3)
    print(
        f"{snr:8.1f}   {asym:10.4f}   {exact.bits:8.4f}   {exact.se:8.4f}"
    )

print()
print("The approximation is derived for many antennas; with two antennas")
print("per user it tracks the exact curve tightly at the band edges and")
print("drifts the most around 10 dB, the waterfall of the QPSK curve.")
