"""Straight-line reference implementation of the soccer movement rules.

Written independently of dron.soccer (no shared helpers, hardcoded default
geometry) so the two can be checked against each other. Only the default
9x6 field is supported.
"""

WIDTH = 9
HEIGHT = 6
LEFT_GOAL = {(0, 2), (0, 3)}
RIGHT_GOAL = {(8, 2), (8, 3)}
SHADED = {(0, 0), (0, 1), (0, 4), (0, 5), (8, 0), (8, 1), (8, 4), (8, 5)}
HORIZON = 100

# N, S, E, W, stand as (dcol, drow); row 0 at the top
DELTAS = [(0, -1), (0, 1), (1, 0), (-1, 0), (0, 0)]


def reference_step(pos_a, pos_b, ball, step_count, action_a, action_b):
    """Returns (pos_a', pos_b', ball', step', reward_a, done)."""
    # validate A's move
    ta = (pos_a[0] + DELTAS[action_a][0], pos_a[1] + DELTAS[action_a][1])
    if ta[0] < 0 or ta[0] >= WIDTH or ta[1] < 0 or ta[1] >= HEIGHT or ta in SHADED:
        ta = pos_a
    # validate B's move
    tb = (pos_b[0] + DELTAS[action_b][0], pos_b[1] + DELTAS[action_b][1])
    if tb[0] < 0 or tb[0] >= WIDTH or tb[1] < 0 or tb[1] >= HEIGHT or tb in SHADED:
        tb = pos_b

    # same destination (includes moving onto a standing player) or a swap:
    # neither moves and the pre-move holder loses the ball
    if ta == tb or (ta == pos_b and tb == pos_a):
        ta = pos_a
        tb = pos_b
        ball = "B" if ball == "A" else "A"

    step_count = step_count + 1

    # scoring: holder standing on the goal it attacks
    if ball == "A" and ta in RIGHT_GOAL:
        return ta, tb, ball, step_count, 1.0, True
    if ball == "B" and tb in LEFT_GOAL:
        return ta, tb, ball, step_count, -1.0, True
    if step_count >= HORIZON:
        return ta, tb, ball, step_count, 0.0, True
    return ta, tb, ball, step_count, 0.0, False
