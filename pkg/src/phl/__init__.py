"""Random walks on percolation clusters: exact heat kernels, parabolic
Harnack constants, the balayage identity, local limit theorem and Green's
function measurements at desk scale."""

__version__ = "0.1.0"
