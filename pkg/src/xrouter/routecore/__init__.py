"""Routing gateway, route tables, the round-robin balancer and the wire protocol."""
from . import protocol
from .balancer import Balancer
from .gateway import Gateway
from .routes import BalancerState, RouteTable, format_endpoint, parse_endpoint, request_slot, round_robin_next, route_lookup

__all__ = [
    "Balancer",
    "BalancerState",
    "Gateway",
    "RouteTable",
    "format_endpoint",
    "parse_endpoint",
    "protocol",
    "request_slot",
    "round_robin_next",
    "route_lookup",
]
