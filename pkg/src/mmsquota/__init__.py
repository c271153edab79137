"""Exact maximin-share allocation under per-category quotas."""
