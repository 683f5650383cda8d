# cython: language_level=3
"""Compiled SCH window loop; same semantics as ``_sch_py.run_window``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    NO_SWITCH = -2
    LTE = -1


def run_window(state, double[:, ::1] crt_sinr, long long[::1] visible_row,
               double[:, ::1] gt_sinr, double[::1] gt_lte, double thr, long ttt_req,
               double hyst, double ret_hyst, long delay_steps, double link_floor,
               long start, long stop):
    cdef long serving = state[0]
    cdef long on_lte = state[1]
    cdef long ttt_cand = state[2]
    cdef long ttt_steps = state[3]
    cdef long sw_target = state[4]
    cdef long sw_from = state[5]
    cdef long sw_cause = state[6]
    cdef long sw_trig = state[7]
    cdef long sw_comp = state[8]
    cdef double sw_thr = state[9]
    cdef long m = crt_sinr.shape[1]
    cdef long t, j, row, best, cand
    cdef double s, link
    cdef bint skip
    cdef long outage_steps = 0, lte_steps = 0
    events = []

    for t in range(start, stop):
        row = visible_row[t]
        if sw_target != NO_SWITCH:
            if t < sw_comp:
                skip = True
            else:
                events.append((sw_trig, sw_comp, sw_from, sw_target, sw_cause, sw_thr))
                if sw_target == LTE:
                    on_lte = 1
                else:
                    serving = sw_target
                    on_lte = 0
                sw_target = NO_SWITCH
                sw_from = NO_SWITCH
                ttt_cand = -1
                ttt_steps = 0
                skip = False
        else:
            skip = False

        if not skip:
            if on_lte:
                best = 0
                for j in range(1, m):
                    if crt_sinr[row, j] > crt_sinr[row, best]:
                        best = j
                if crt_sinr[row, best] >= thr + ret_hyst:
                    sw_target = best; sw_from = LTE; sw_cause = 2
                    sw_trig = t; sw_comp = t + delay_steps; sw_thr = thr
            else:
                s = crt_sinr[row, serving]
                if s < thr:
                    sw_target = LTE; sw_from = serving; sw_cause = 1
                    sw_trig = t; sw_comp = t + delay_steps; sw_thr = thr
                    ttt_cand = -1
                    ttt_steps = 0
                else:
                    cand = -1
                    for j in range(m):
                        if j != serving and (cand < 0 or crt_sinr[row, j] > crt_sinr[row, cand]):
                            cand = j
                    if cand >= 0 and crt_sinr[row, cand] > s + hyst and crt_sinr[row, cand] >= thr:
                        if cand != ttt_cand:
                            ttt_cand = cand
                            ttt_steps = 0
                        ttt_steps += 1
                        if ttt_steps >= ttt_req:
                            sw_target = cand; sw_from = serving; sw_cause = 0
                            sw_trig = t; sw_comp = t + delay_steps; sw_thr = thr
                            ttt_cand = -1
                            ttt_steps = 0
                    else:
                        ttt_cand = -1
                        ttt_steps = 0

        if on_lte:
            lte_steps += 1
            link = gt_lte[t]
        else:
            link = gt_sinr[t, serving]
        if link < link_floor:
            outage_steps += 1

    new_state = (serving, on_lte, ttt_cand, ttt_steps, sw_target, sw_from, sw_cause,
                 sw_trig, sw_comp, sw_thr)
    return new_state, events, outage_steps, lte_steps
