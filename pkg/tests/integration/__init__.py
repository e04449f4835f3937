"""Tests de bout en bout : commandes CLI et runs d'adaptation."""
