"""Tabulated bifurcation points used as reference data.

Each row is ``(k, sigma, coordinate, parameter)``; the coordinate is ``s``
(bar family, parameter ``f``) or ``t`` (hat family, parameter ``ζ``), both
rounded to five decimals.
"""

BAR_ZETA0_D01 = dict(
    mode="bar",
    zeta=0.0,
    d=0.1,
    rows=[
        (5, 1, 1.03235, 1.50871),
        (5, -1, 1.50585, 3.73195),
        (6, 1, 1.16104, 1.94874),
        (6, -1, 1.85795, 6.67731),
        (7, 1, 1.31863, 2.64494),
        (7, -1, 2.18965, 10.72430),
        (8, 1, 1.48760, 3.61248),
        (8, -1, 2.51404, 16.08736),
    ],
)

BAR_ZETA10_DM02 = dict(
    mode="bar",
    zeta=10.0,
    d=-0.2,
    rows=[
        (1, 1, 1.82156, 12.30707),
        (1, -1, 3.12227, 3.21945),
        (2, 1, 1.76678, 12.28053),
        (2, -1, 3.02410, 3.97844),
        (3, 1, 1.67183, 12.16097),
        (3, -1, 2.85278, 6.02862),
        (4, 1, 1.53017, 11.81841),
        (4, -1, 2.59331, 8.87959),
        (5, 1, 1.33036, 11.02958),
        (5, -1, 2.21287, 11.50749),
        (6, 1, 1.06458, 9.49913),
        (6, -1, 1.61245, 12.04060),
    ],
)

HAT_F16_D01 = dict(
    mode="hat",
    f=1.6,
    d=0.1,
    rows=[
        (1, 1, 0.10528, 2.63750),
        (1, -1, 0.77130, 2.24888),
        (2, 1, -0.18543, 2.28327),
        (2, -1, 0.75556, 2.25196),
        (3, 1, -0.52046, 1.25702),
        (3, -1, 0.72127, 2.26952),
        (4, 1, -0.72866, 0.13682),
        (4, -1, 0.66089, 2.32248),
        (5, -1, -0.77281, -0.18666),
        (5, -1, 0.56321, 2.42954),
        (6, -1, -0.61695, 0.80166),
        (6, -1, 0.40312, 2.58449),
        (7, -1, -0.20600, 2.24085),
        (7, -1, 0.01535, 2.57475),
    ],
)

HAT_F2_DM01 = dict(
    mode="hat",
    f=2.0,
    d=-0.1,
    rows=[
        (1, -1, 0.85260, 2.72386),
        (1, 1, 0.22806, 4.02619),
        (2, -1, 0.86118, 2.72771),
        (2, 1, 0.49553, 3.58830),
        (3, 1, 0.86262, 2.72883),
        (3, 1, 0.78647, 2.79924),
    ],
)

ALL_SETS = [BAR_ZETA0_D01, BAR_ZETA10_DM02, HAT_F16_D01, HAT_F2_DM01]
HAT_SETS = [HAT_F16_D01, HAT_F2_DM01]
BAR_SETS = [BAR_ZETA0_D01, BAR_ZETA10_DM02]

# turning points carrying dark solitons (f = 2, d = -0.1)
DARK_ONE_SOLITON_ZETA = 3.30685
DARK_TWO_SOLITON_ZETA = 3.25783
# bright one-soliton on the f = 1.6, d = 0.1 diagram
BRIGHT_ONE_SOLITON_ZETA = 3.15568
