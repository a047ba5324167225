"""Emit the shipped simple18 skeleton config.

18 bones, 17 joints, 34 DOF. Skin: an octahedral sleeve of 8 triangles per
bone, except the hands which get flat palm/back paddles so objects rest flat
on the palm. Run from the repo root:

    python tools/make_skeleton.py
"""
import json
import os


def octa_panel(length, width):
    """8-triangle sleeve around the bone segment (origin -> (0, length, 0))."""
    bottom = [0.0, 0.0, 0.0]
    top = [0.0, length, 0.0]
    mid = length / 2.0
    px = [width, mid, 0.0]
    nx = [-width, mid, 0.0]
    pz = [0.0, mid, width]
    nz = [0.0, mid, -width]
    # wound so the cross(e1, e2) normal points outward
    return [
        [bottom, px, pz], [bottom, nz, px], [bottom, nx, nz], [bottom, pz, nx],
        [top, pz, px], [top, px, nz], [top, nz, nx], [top, nx, pz],
    ]


def hand_panel(length, width, thickness):
    """Two quads: palm face (+z local) and back face (-z local)."""
    z = thickness / 2.0
    c = [
        [-width, 0.0, z], [width, 0.0, z], [width, length, z], [-width, length, z],
        [-width, 0.0, -z], [width, 0.0, -z], [width, length, -z], [-width, length, -z],
    ]
    return [
        [c[0], c[1], c[2]], [c[0], c[2], c[3]],      # palm, normal +z
        [c[4], c[6], c[5]], [c[4], c[7], c[6]],      # back, normal -z
    ]


def mirror_x(tris):
    out = []
    for tri in tris:
        v = [[-p[0], p[1], p[2]] for p in tri]
        out.append([v[0], v[2], v[1]])  # re-wind to keep normals outward
    return out


def main():
    bones = [
        {"id": "pelvis", "parent": None, "offset": [0.0, 0.9, 0.0]},
        {"id": "spine1", "parent": "pelvis", "offset": [0.0, 0.15, 0.0]},
        {"id": "spine2", "parent": "spine1", "offset": [0.0, 0.15, 0.0]},
        {"id": "head", "parent": "spine2", "offset": [0.0, 0.25, 0.0]},
        # arms hang down: rest rotation flips local +y to world -y
        {"id": "upper_arm_l", "parent": "spine2", "offset": [-0.20, 0.10, 0.0],
         "rotation_deg": [0.0, 0.0, 180.0]},
        {"id": "forearm_l", "parent": "upper_arm_l", "offset": [0.0, 0.26, 0.0]},
        {"id": "hand_l", "parent": "forearm_l", "offset": [0.0, 0.25, 0.0]},
        {"id": "fingers_l", "parent": "hand_l", "offset": [0.0, 0.09, 0.0]},
        {"id": "upper_arm_r", "parent": "spine2", "offset": [0.20, 0.10, 0.0],
         "rotation_deg": [0.0, 0.0, 180.0]},
        {"id": "forearm_r", "parent": "upper_arm_r", "offset": [0.0, 0.26, 0.0]},
        {"id": "hand_r", "parent": "forearm_r", "offset": [0.0, 0.25, 0.0]},
        {"id": "fingers_r", "parent": "hand_r", "offset": [0.0, 0.09, 0.0]},
        {"id": "thigh_l", "parent": "pelvis", "offset": [-0.10, 0.0, 0.0],
         "rotation_deg": [0.0, 0.0, 180.0]},
        {"id": "shin_l", "parent": "thigh_l", "offset": [0.0, 0.40, 0.0]},
        {"id": "foot_l", "parent": "shin_l", "offset": [0.0, 0.40, 0.0],
         "rotation_deg": [90.0, 0.0, 0.0]},
        {"id": "thigh_r", "parent": "pelvis", "offset": [0.10, 0.0, 0.0],
         "rotation_deg": [0.0, 0.0, 180.0]},
        {"id": "shin_r", "parent": "thigh_r", "offset": [0.0, 0.40, 0.0]},
        {"id": "foot_r", "parent": "shin_r", "offset": [0.0, 0.40, 0.0],
         "rotation_deg": [90.0, 0.0, 0.0]},
    ]

    X, Y, Z = [1, 0, 0], [0, 1, 0], [0, 0, 1]

    def joint(name, parent, child, axes, limits, torque):
        return {"name": name, "parent": parent, "child": child, "axes": axes,
                "limits_deg": limits, "max_torque": torque}

    joints = [
        joint("spine1", "pelvis", "spine1", [X, Y, Z], [[-30, 30], [-30, 30], [-20, 20]], [30, 30, 30]),
        joint("spine2", "spine1", "spine2", [X, Y, Z], [[-30, 30], [-30, 30], [-20, 20]], [30, 30, 30]),
        joint("neck", "spine2", "head", [X, Y], [[-60, 60], [-80, 80]], [10, 10]),
    ]
    for side in ("l", "r"):
        joints += [
            joint(f"shoulder_{side}", "spine2", f"upper_arm_{side}", [X, Y, Z],
                  [[-150, 150], [-90, 90], [-90, 90]], [15, 15, 15]),
            joint(f"elbow_{side}", f"upper_arm_{side}", f"forearm_{side}", [X],
                  [[0, 145]], [12]),
            joint(f"wrist_{side}", f"forearm_{side}", f"hand_{side}", [X, Z],
                  [[-60, 60], [-60, 60]], [5, 5]),
            joint(f"finger_{side}", f"hand_{side}", f"fingers_{side}", [X],
                  [[0, 90]], [3]),
        ]
    for side in ("l", "r"):
        joints += [
            joint(f"hip_{side}", "pelvis", f"thigh_{side}", [X, Y, Z],
                  [[-120, 30], [-45, 45], [-30, 30]], [40, 40, 40]),
            joint(f"knee_{side}", f"thigh_{side}", f"shin_{side}", [X],
                  [[0, 150]], [30]),
            joint(f"ankle_{side}", f"shin_{side}", f"foot_{side}", [X, Z],
                  [[-45, 45], [-30, 30]], [15, 15]),
        ]

    skin = []

    def add(bone, tris):
        for t in tris:
            skin.append({"bone": bone, "vertices": [[round(c, 5) for c in p] for p in t]})

    add("pelvis", octa_panel(0.15, 0.16))
    add("spine1", octa_panel(0.15, 0.15))
    add("spine2", octa_panel(0.25, 0.16))
    add("head", octa_panel(0.22, 0.10))
    for side, flip in (("l", False), ("r", True)):
        ua = octa_panel(0.26, 0.05)
        fa = octa_panel(0.25, 0.04)
        fl = octa_panel(0.09, 0.025)
        hp = hand_panel(0.09, 0.04, 0.025)
        th = octa_panel(0.40, 0.07)
        sh = octa_panel(0.40, 0.055)
        ft = octa_panel(0.18, 0.04)
        if flip:
            ua, fa, fl, hp, th, sh, ft = map(mirror_x, (ua, fa, fl, hp, th, sh, ft))
        add(f"upper_arm_{side}", ua)
        add(f"forearm_{side}", fa)
        add(f"hand_{side}", hp)
        add(f"fingers_{side}", fl)
        add(f"thigh_{side}", th)
        add(f"shin_{side}", sh)
        add(f"foot_{side}", ft)

    config = {"name": "simple18", "bones": bones, "joints": joints, "skin": skin}

    dof = sum(len(j["axes"]) for j in joints)
    print(f"bones={len(bones)} joints={len(joints)} dof={dof} triangles={len(skin)}")

    out = os.path.join(os.path.dirname(__file__), "..", "src", "sensorium",
                       "data", "skeletons", "simple18.json")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=1)
    print("wrote", os.path.normpath(out))


if __name__ == "__main__":
    main()
