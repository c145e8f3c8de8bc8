"""Published (NIQE, MSE) pairs for one GAN backbone and dataset, and the ranks
reported for them on the perception-distortion plane."""

PD_TABLE = [
    ("Baseline", 6.5263, 10.50e-3), ("VGG-16", 6.5673, 10.41e-3), ("AE-CT", 6.1640, 10.55e-3),
    ("SSIM-L", 6.0690, 10.37e-3), ("EDGE", 6.4413, 10.63e-3), ("MSTLF-max", 6.5024, 10.50e-3),
    ("MSTLF-average", 6.2366, 10.32e-3), ("MSTLF-Frobenius", 6.0670, 10.42e-3),
    ("MSTLF-attention", 5.1934, 11.62e-3),
]
PD_RANKS = {"MSTLF-attention": 1, "MSTLF-Frobenius": 2, "SSIM-L": 3, "AE-CT": 4, "MSTLF-average": 5,
            "EDGE": 6, "MSTLF-max": 7, "Baseline": 8, "VGG-16": 9}
