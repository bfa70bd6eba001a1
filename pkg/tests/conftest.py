import json

import pytest
from hypothesis import HealthCheck, settings

import sharedaccess as sa

settings.register_profile(
    "ci", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


def table1_channel() -> sa.ChannelParams:
    return sa.ChannelParams(
        alpha=4.0,
        theta=1.0,  # 0 dB
        noise_mw=sa.dbm_to_mw(-113.97),
        p1_mw=100.0,
        p2_max_mw=0.02,
    )


def table1_geometry() -> sa.Geometry:
    return sa.Geometry(d_p=300.0, d_s=40.0, radius=500.0, lambda_s=2e-4)


def table1_config(
    lam=0.3, q1=0.5, q2=0.5, m=sa.Finite(3), p2_mw=0.01, d_max=3.5
) -> sa.ValidatedConfig:
    protocol = sa.ProtocolParams(lam=lam, q1=q1, q2=q2, m=m, p2_mw=p2_mw)
    return sa.validate(table1_channel(), table1_geometry(), protocol, sa.DelayConstraint(d_max))


TABLE1_DOC = {
    "channel": {"alpha": 4.0, "theta_db": 0.0, "noise_dbm": -113.97, "p1_mw": 100.0, "p2_max_mw": 0.02},
    "geometry": {"d_p": 300.0, "d_s": 40.0, "radius": 500.0, "lambda_s": 2e-4},
    "protocol": {"lambda": 0.3, "q1": 0.5, "q2": 0.5, "m": 3, "p2_mw": 0.01},
    "delay_constraint": {"d_max": 3.5},
}


@pytest.fixture
def cfg():
    return table1_config()


@pytest.fixture
def config_file(tmp_path):
    def write(doc=None, **overrides):
        doc = json.loads(json.dumps(doc if doc is not None else TABLE1_DOC))
        for dotted, value in overrides.items():
            section, key = dotted.split("__")
            doc.setdefault(section, {})[key] = value
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        return str(path)

    return write
