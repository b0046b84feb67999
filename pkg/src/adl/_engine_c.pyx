# cython: language_level=3
# The compiled engine is the interpreted kernel included verbatim so the
# two backends cannot drift apart.
include "_engine.py"
