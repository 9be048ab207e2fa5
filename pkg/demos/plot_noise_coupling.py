"""
Coupled noise on nested grids
=============================

One bundle of Brownian increments and Poisson jump times is sampled on the
finest grid; coarser grids reuse it by summing consecutive increments.
"""

import numpy as np

from levymv import TimeGrid, coarsen, derive_stream, sample_bundle

# every particle draws from its own counter-based stream, keyed by
# (seed, path, particle), so particle 3 sees the same numbers whatever N is
fine = TimeGrid(1.0, 2 ** 8)
small = sample_bundle(fine, 4, 1, intensity=2.0, mark_sampler=None, master_seed=7)
large = sample_bundle(fine, 400, 1, intensity=2.0, mark_sampler=None, master_seed=7)
print("same increments for shared particles:", np.array_equal(small.brownian, large.brownian[:4]))

# coarse increments are plain sums of the fine ones
coarse = coarsen(small, 16)
print("coarse grid:", coarse.grid)
print("max |coarse - sum(fine)|:",
      np.abs(coarse.brownian - small.brownian.reshape(4, 16, 16, 1).sum(axis=2)).max())

# jump times are continuous; each grid only decides which step they fall in
print("jump times of particle 0:", np.round(small.jump_times[0], 4))
print("fine-step counts   :", np.flatnonzero(small.jump_counts(fine)[0]))
print("coarse-step counts :", np.flatnonzero(coarse.jump_counts(coarse.grid)[0]))

# a stream is a pure function of its key
a = derive_stream(7, 0, 3).normal(size=3)
b = derive_stream(7, 0, 3).normal(size=3)
print("stream reproducible:", np.array_equal(a, b))
