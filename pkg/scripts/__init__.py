"""Runnable entry points: the kgd CLI and database bootstrap."""
