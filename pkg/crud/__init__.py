# This file makes the crud package importable 