#!/usr/bin/env python3
"""Writes the shipped instance files to data/instances/.

The 8 academic hospitals use the reference travel-time matrix (quarters of an
hour). The 35-location network adds 27 city hospitals; travel times involving
them are estimated from coordinates: great-circle distance times a road factor
of 1.25 at 80 km/h, rounded up to whole quarters (minimum 1). This estimate
reproduces the reference academic entries to within one quarter, e.g.
Amsterdam-Maastricht 11 and Amsterdam-Groningen 10 exactly.

The 8-hospital clusters are fixed by hand: the first engineer serves both
Amsterdam sites and Leiden, the second Maastricht and Nijmegen, the third
Rotterdam, Utrecht and Groningen. The 35-hospital clusters come from Lloyd's
algorithm on projected coordinates with each cluster seeded at, and pinned to,
one engineer's starting location (the procedure of `kdtmpa decompose`).
"""

import json
import math
import os
import sys

ACADEMIC = [
    ("Amsterdam (AMC)", 52.2941, 4.9581),
    ("Amsterdam (VUmc)", 52.3343, 4.8594),
    ("Maastricht", 50.8330, 5.7100),
    ("Rotterdam", 51.9110, 4.4690),
    ("Leiden", 52.1660, 4.4780),
    ("Groningen", 53.2220, 6.5760),
    ("Nijmegen", 51.8250, 5.8630),
    ("Utrecht", 52.0860, 5.1800),
]

ACADEMIC_TRAVEL = [
    [0, 1, 11, 4, 3, 10, 7, 3],
    [1, 0, 11, 5, 3, 10, 7, 3],
    [11, 11, 0, 11, 12, 17, 8, 10],
    [4, 5, 11, 0, 3, 13, 7, 4],
    [3, 3, 12, 3, 0, 12, 8, 4],
    [10, 10, 17, 13, 12, 0, 11, 10],
    [7, 7, 8, 7, 8, 11, 0, 5],
    [3, 3, 10, 4, 4, 10, 5, 0],
]

CITY = [
    ("Arnhem", 51.9850, 5.8990),
    ("Eindhoven", 51.4410, 5.4700),
    ("Tilburg", 51.5600, 5.0910),
    ("Breda", 51.5890, 4.7760),
    ("Den Haag", 52.0700, 4.3000),
    ("Zwolle", 52.5160, 6.0830),
    ("Enschede", 52.2210, 6.8940),
    ("Apeldoorn", 52.2110, 5.9690),
    ("Amersfoort", 52.1560, 5.3870),
    ("Haarlem", 52.3870, 4.6460),
    ("Alkmaar", 52.6320, 4.7480),
    ("Leeuwarden", 53.2010, 5.7990),
    ("Den Bosch", 51.6970, 5.3040),
    ("Venlo", 51.3700, 6.1720),
    ("Heerlen", 50.8880, 5.9790),
    ("Deventer", 52.2550, 6.1630),
    ("Dordrecht", 51.8130, 4.6900),
    ("Delft", 52.0120, 4.3570),
    ("Almere", 52.3710, 5.2220),
    ("Hilversum", 52.2230, 5.1760),
    ("Ede", 52.0400, 5.6650),
    ("Emmen", 52.7850, 6.8970),
    ("Assen", 52.9930, 6.5640),
    ("Middelburg", 51.4990, 3.6140),
    ("Roermond", 51.1940, 5.9870),
    ("Hoorn", 52.6430, 5.0600),
    ("Gouda", 52.0120, 4.7110),
]

M8_CLUSTERS = [[1, 2, 5], [3, 7], [4, 6, 8]]

ROAD_FACTOR = 1.25
SPEED_KMH = 80.0

Q2 = [[0.8, 0.2, 0, 0, 0], [0, 0.7, 0.3, 0, 0], [0, 0, 0.7, 0.3, 0], [0, 0, 0, 0.7, 0.3], [0, 0, 0, 0, 1]]
Q3 = [[0.8, 0.2, 0, 0, 0], [0, 0.3, 0.7, 0, 0], [0, 0, 0.3, 0.7, 0], [0, 0, 0, 0.3, 0.7], [0, 0, 0, 0, 1]]
Q4 = [[0.8, 0.2, 0, 0, 0, 0, 0],
      [0, 0.7, 0.3, 0, 0, 0, 0],
      [0, 0, 0.7, 0.3, 0, 0, 0],
      [0, 0, 0, 0.7, 0.3, 0, 0],
      [0, 0, 0, 0, 0.7, 0.3, 0],
      [0, 0, 0, 0, 0, 0.7, 0.3],
      [0, 0, 0, 0, 0, 0, 1]]
QT1 = [["199/200", "1/200"], [0, 1]]
QT2 = [["149/150", "1/150", 0], [0, "49/50", "1/50"], [0, 0, 1]]
QT3 = [["399/400", "1/400"], [0, 1]]
QT4 = [["299/300", "1/300", 0], [0, "99/100", "1/100"], [0, 0, 1]]


def haversine_km(a, b):
    lat1, lon1, lat2, lon2 = map(math.radians, (a[1], a[2], b[1], b[2]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(h))


def quarters(a, b):
    hours = haversine_km(a, b) * ROAD_FACTOR / SPEED_KMH
    return max(1, math.ceil(hours * 4 - 1e-9))


def project(sites):
    """Equirectangular projection in km around the mean latitude."""
    lat0 = math.radians(sum(s[1] for s in sites) / len(sites))
    return [[round(s[2] * 111.320 * math.cos(lat0), 3), round(s[1] * 110.574, 3)] for s in sites]


def pinned_kmeans(points, pinned, max_iter=1000):
    centers = [list(points[p]) for p in pinned]
    pin_of = {p: c for c, p in enumerate(pinned)}
    label = [-1] * len(points)
    for _ in range(max_iter):
        changed = False
        for i, pt in enumerate(points):
            if i in pin_of:
                best = pin_of[i]
            else:
                d = [(pt[0] - c[0]) ** 2 + (pt[1] - c[1]) ** 2 for c in centers]
                best = d.index(min(d))
            if label[i] != best:
                label[i], changed = best, True
        for c in range(len(centers)):
            members = [points[i] for i in range(len(points)) if label[i] == c]
            centers[c] = [sum(p[0] for p in members) / len(members), sum(p[1] for p in members) / len(members)]
        if not changed:
            break
    return [[i + 1 for i in range(len(points)) if label[i] == c] for c in range(len(centers))]


def travel_matrix(sites):
    n = len(sites)
    t = [[0 if i == j else quarters(sites[i], sites[j]) for j in range(n)] for i in range(n)]
    for i in range(len(ACADEMIC)):
        for j in range(len(ACADEMIC)):
            t[i][j] = ACADEMIC_TRAVEL[i][j]
    return t


def unit_instance(name, mats, description):
    M = sum(len(v) for v in mats.values())
    machines = []
    for label, idxs in mats.items():
        for _ in idxs:
            machines.append({"degradation": label, "repair_pm": 1, "repair_cm": 1})
    return {
        "name": name,
        "description": description,
        "gamma": 0.99,
        "locations": [f"L{i + 1}" for i in range(M)],
        "travel": [[0 if i == j else 1 for j in range(M)] for i in range(M)],
        "degradation": {k: {"Q2": Q2, "Q3": Q3, "Q4": Q4}[k] for k in mats},
        "machines": machines,
        "costs": {"structure": "C2"},
        "engineers": [1],
    }


def hospital_instance(name, sites, matrix_name, matrix, structure, engineers, description, clusters=None):
    coords = project(sites)
    if clusters is None:
        clusters = pinned_kmeans(coords, [e - 1 for e in engineers])
    return {
        "name": name,
        "description": description,
        "gamma": 0.99,
        "locations": [s[0] for s in sites],
        "coords": coords,
        "travel": travel_matrix(sites),
        "degradation": {matrix_name: matrix},
        "machines": [{"degradation": matrix_name, "repair_pm": 4, "repair_cm": 4} for _ in sites],
        "costs": {"structure": structure},
        "engineers": engineers,
        "clusters": clusters,
    }


def dumps(value, indent=0):
    """JSON with one line per scalar list (matrix rows stay readable)."""
    pad = "  " * (indent + 1)
    if isinstance(value, dict):
        items = [f'{pad}{json.dumps(k)}: {dumps(v, indent + 1)}' for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(value, list) and any(isinstance(v, (list, dict)) for v in value):
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in value) + "\n" + "  " * indent + "]"
    return json.dumps(value, ensure_ascii=False)


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "instances")
    os.makedirs(out_dir, exist_ok=True)
    m35 = ACADEMIC + CITY
    names = [s[0] for s in m35]
    eng35 = [1, 3, 4, names.index("Arnhem") + 1, 6]
    docs = [
        unit_instance("M4K1-Q2Q3C2", {"Q2": [0, 1], "Q3": [2, 3]},
                      "Four machines, one engineer, unit travel and repair times."),
        unit_instance("M6K1-Q2Q3Q4C2", {"Q2": [0, 1], "Q3": [2, 3], "Q4": [4, 5]},
                      "Six machines, one engineer, unit travel and repair times."),
        hospital_instance("M8K3-Qt1C1", ACADEMIC, "Qt1", QT1, "C1", [1, 3, 4],
                          "Academic hospitals, dispatch and repositioning.", M8_CLUSTERS),
        hospital_instance("M8K3-Qt2C3", ACADEMIC, "Qt2", QT2, "C3", [1, 3, 4],
                          "Academic hospitals, preventive maintenance.", M8_CLUSTERS),
        hospital_instance("M35K5-Qt3C1", m35, "Qt3", QT3, "C1", eng35,
                          "Reconstructed 35-hospital network, dispatch and repositioning."),
        hospital_instance("M35K5-Qt4C3", m35, "Qt4", QT4, "C3", eng35,
                          "Reconstructed 35-hospital network, preventive maintenance."),
    ]
    for doc in docs:
        path = os.path.join(out_dir, doc["name"] + ".json")
        with open(path, "w") as f:
            f.write(dumps(doc) + "\n")
        print(path)


if __name__ == "__main__":
    main()
