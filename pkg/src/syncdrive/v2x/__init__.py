from .broker import (
    BrokerError,
    Delivery,
    NetworkModel,
    SimBroker,
    Subscription,
    TopicCounters,
    topic_matches,
    validate_pattern,
)
from .codec import (
    CAM_FIELDS,
    CamDecodeError,
    CamError,
    CamMessage,
    cam_topic,
    decode_cam,
    encode_cam,
    station_from_topic,
)
from .transport import LoopbackTransport, MqttTransport, Received, Transport, TransportError

__all__ = [
    "BrokerError",
    "CAM_FIELDS",
    "CamDecodeError",
    "CamError",
    "CamMessage",
    "Delivery",
    "LoopbackTransport",
    "MqttTransport",
    "NetworkModel",
    "Received",
    "SimBroker",
    "Subscription",
    "TopicCounters",
    "Transport",
    "TransportError",
    "cam_topic",
    "decode_cam",
    "encode_cam",
    "station_from_topic",
    "topic_matches",
    "validate_pattern",
]
