"""Client-side agent runtimes: decision-tree AI, command AI, scripted human."""
