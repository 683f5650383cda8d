"""Pure-Python SCH window loop; used when the compiled kernel is unavailable."""

from ..dc_core import advance


def run_window(state, crt_sinr, visible_row, gt_sinr, gt_lte, thr, ttt_req, hyst, ret_hyst,
               delay_steps, link_floor, start, stop):
    st = list(state)
    events = []
    outage_steps = 0
    lte_steps = 0
    cache_row = -1
    cur = None
    for t in range(start, stop):
        row = int(visible_row[t])
        if row != cache_row:
            cur = [float(v) for v in crt_sinr[row]]
            cache_row = row
        ev = advance(st, cur, thr, ttt_req, hyst, ret_hyst, delay_steps, t)
        if ev is not None:
            events.append(ev)
        if st[1]:
            lte_steps += 1
            link = gt_lte[t]
        else:
            link = gt_sinr[t, st[0]]
        if link < link_floor:
            outage_steps += 1
    return tuple(st), events, outage_steps, lte_steps
