"""Offline metadata analyzer for intercepted network captures.

Reduces stored packet captures to protocol metadata (flows, HTTP, DNS,
mail, FTP), persists it in a single-file relational store, and evaluates
investigator-authored detection rules into a tree of devices and services
seen behind the tapped address.
"""

__version__ = "0.1.0"
