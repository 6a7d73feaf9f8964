"""Constant-speed lane-following prediction with growing uncertainty."""

import numpy as np
import pytest

from drivesim.dynamics import AgentState
from drivesim.geometry import Polyline
from drivesim.prediction import PredictorConfig, lane_chain, predict_all
from drivesim.scenario import Lanelet, StreetNetwork

DT = 0.1


def straight_network():
    xs = np.linspace(0.0, 100.0, 11)
    a = Lanelet("a", Polyline(np.column_stack([xs, np.full(11, 2.0)])),
                Polyline(np.column_stack([xs, np.full(11, -2.0)])),
                successors=["b"])
    xs2 = np.linspace(100.0, 200.0, 11)
    b = Lanelet("b", Polyline(np.column_stack([xs2, np.full(11, 2.0)])),
                Polyline(np.column_stack([xs2, np.full(11, -2.0)])))
    return StreetNetwork([a, b])


def test_config_validation():
    with pytest.raises(ValueError):
        PredictorConfig(horizon=-1.0)
    with pytest.raises(ValueError):
        PredictorConfig(horizon=0.35).n_steps(DT)
    assert PredictorConfig().n_steps(DT) == 30


def test_constant_speed_along_lane():
    net = straight_network()
    preds = predict_all({"v1": AgentState(10.0, 0.5, 8.0, 0.0)}, net,
                        PredictorConfig(), DT)
    path = preds["v1"]
    assert len(path.states) == 31
    for k, st in enumerate(path.states):
        assert st.x == pytest.approx(10.0 + 8.0 * k * DT, abs=1e-6)
        assert st.y == pytest.approx(0.5, abs=1e-6)  # lateral offset preserved
        assert st.v == 8.0


def test_stddev_growth():
    net = straight_network()
    preds = predict_all({"v1": AgentState(10.0, 0.0, 8.0, 0.0)}, net,
                        PredictorConfig(growth_rate=0.5), DT)
    stddev = preds["v1"].pos_stddev
    assert stddev[0] == 0.0
    for k in range(len(stddev)):
        assert stddev[k] == pytest.approx(0.5 * k * DT)


def test_crosses_into_successor():
    net = straight_network()
    preds = predict_all({"v1": AgentState(95.0, 0.0, 30.0, 0.0)}, net,
                        PredictorConfig(), DT)
    last = preds["v1"].states[-1]
    assert last.x == pytest.approx(95.0 + 30.0 * 3.0, abs=1e-6)


def test_off_road_straight_fallback():
    net = straight_network()
    state = AgentState(50.0, 40.0, 6.0, np.pi / 4)  # far off any lanelet
    preds = predict_all({"v1": state}, net, PredictorConfig(), DT)
    last = preds["v1"].states[-1]
    assert last.x == pytest.approx(50.0 + 6.0 * 3.0 * np.cos(np.pi / 4))
    assert last.y == pytest.approx(40.0 + 6.0 * 3.0 * np.sin(np.pi / 4))


def test_lane_chain_follows_successors():
    net = straight_network()
    chain = lane_chain(net, "a", 0.0, 150.0)
    assert chain == ("a", "b")
