"""Small configs and environments shared by several test modules."""

from vrmec.config import from_dict
from vrmec.harness import make_env, make_topology
from vrmec.predictor import LastValuePredictor

DESK = {
    "rendering": {"resolution": 42},
    "phy": {"bandwidth": 1e5},
    "predictor": {"kind": "last-value"},
}


def desk_config(b=4, k=4, n_fov=4, seed=0, **sections):
    data = {key: dict(val) for key, val in DESK.items()}
    data["topology"] = {"n_mecs": b, "n_users": k}
    data["mobility"] = {"n_fov": n_fov}
    data["seed"] = seed
    for key, val in sections.items():
        if isinstance(val, dict):
            data.setdefault(key, {}).update(val)
        else:
            data[key] = val
    return from_dict(data)


def desk_env(b=4, k=4, n_fov=4, seed=0, slots=20, **sections):
    sections.setdefault("agent", {})
    sections["agent"] = dict(sections["agent"], slots=slots)
    cfg = desk_config(b, k, n_fov, seed, **sections)
    return make_env(cfg, make_topology(cfg), LastValuePredictor(n_fov, cfg.predictor.memory)), cfg
