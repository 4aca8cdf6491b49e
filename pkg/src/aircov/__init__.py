"""Low-altitude cellular coverage prediction from station operational data.

Pipeline: expert feature compression (geo), a disentangled additive network
plus its ablation/wrong-wiring controls (model, nnet), a synthetic
ground-truth oracle (synth), dataset handling and station-level splits
(data, features), metrics and classical baselines (metrics, baselines),
experiment sweeps (experiment), and rasterized coverage maps (covmap).
"""

__version__ = "0.1.0"
