"""Pure-Python instrumented oracle for one automaton step.

Written against the documented update contract only, without looking at
the kernel code shape: plain dictionaries and event lists instead of
decision/gather arrays.  Slow (use on small grids), but it both checks the
final state and exposes *why* each voxel changed, which the rule-gate
tests need.
"""

from pixel2cancer import rng
from pixel2cancer.grid import neighborhood26


def python_step(pop, press, levels, simulable, params, iteration):
    """Apply one synchronous step; returns (new_pop, new_press, events).

    pop/press/levels/simulable are numpy arrays indexed [x, y, z]; params
    is a SimulationParams.  events records every rule firing:
      grow:      set of voxels that took the R1 increment
      death:     set of voxels that died
      choice:    source -> chosen target for every acting source
      soft_hits: target -> number of successful soft invasions
      press_add: target -> pressure contributions this step
      breach:    set of hard targets whose threshold was reached
    """
    dims = pop.shape
    seed = params.seed
    p_inv = {1: params.p_invade_by_level[0], 2: params.p_invade_by_level[1],
             3: params.p_invade_by_level[2]}
    thr = {0: params.pressure_threshold_boundary, 4: params.pressure_threshold_dense}

    events = {
        "grow": set(), "death": set(), "choice": {},
        "soft_hits": {}, "press_add": {}, "breach": set(),
    }

    def lin(x, y, z):
        return x + dims[0] * (y + dims[1] * z)

    def u(x, y, z, tag):
        return rng.counter_uniform(seed, lin(x, y, z), iteration, tag)

    nx, ny, nz = dims
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                p = int(pop[x, y, z])
                if p <= 0:
                    continue
                v = (x, y, z)
                nbrs = neighborhood26(v, dims)

                if p < 10:
                    if u(x, y, z, rng.TAG_GROW) < params.p_grow:
                        events["grow"].add(v)
                else:
                    full_nbhd = len(nbrs) == 26
                    if full_nbhd and all(int(pop[t]) in (10, -1) for t in nbrs):
                        if u(x, y, z, rng.TAG_DEATH) < params.p_death:
                            events["death"].add(v)

                if not nbrs:
                    continue
                j = int(u(x, y, z, rng.TAG_DIR) * len(nbrs))
                if j >= len(nbrs):
                    j = len(nbrs) - 1
                t = nbrs[j]
                events["choice"][v] = t
                tp = int(pop[t])
                if simulable[t] == 0 or tp in (10, -1):
                    continue
                lv = int(levels[t])
                if lv in (1, 2, 3):
                    if u(x, y, z, rng.TAG_INVADE) < (p / 10.0) * p_inv[lv]:
                        events["soft_hits"][t] = events["soft_hits"].get(t, 0) + 1
                elif p == 10:
                    events["press_add"][t] = events["press_add"].get(t, 0) + 1

    new_pop = pop.copy()
    new_press = press.copy()
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                v = (x, y, z)
                p = int(pop[x, y, z])
                if p == -1:
                    continue
                if p == 10:
                    if v in events["death"]:
                        new_pop[v] = -1
                    continue
                # However many invaders landed, invasion moves a voxel by
                # at most one population step; pressure contributions sum.
                inc = 1 if events["soft_hits"].get(v, 0) > 0 else 0
                pr = int(press[v])
                adds = events["press_add"].get(v, 0)
                if adds > 0:
                    pr += adds
                    if pr >= thr[int(levels[v])]:
                        inc = 1
                        pr = 0
                        events["breach"].add(v)
                    pr = min(pr, 65535)
                total = p + (1 if v in events["grow"] else 0) + inc
                total = min(total, 10)
                if total == 10:
                    pr = 0
                new_pop[v] = total
                new_press[v] = pr
    return new_pop, new_press, events
