"""Dataflow-to-HMD bridge: scene networks, a simulated headset, stereo software
rendering and frame-timing instrumentation, plus a wire protocol for a browser
companion viewer.

Conventions used across the package:

* World/tracking space is metric (meters), right-handed, Y up, -Z forward.
* Mesh model space is millimeters; the scene assembler applies the model scale.
* 4x4 matrices are row-major and multiply column vectors (``M @ p``).
"""

__version__ = "0.1.0"
