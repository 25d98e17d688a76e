"""
Reading architecture strings
============================

A column is described by one string: ``MxHxW`` input maps, ``<n>C<k>``
convolutions, ``MP<p>`` max pooling and ``<n>N`` fully connected layers.
Parsing it infers every layer's shape, so a typo in a kernel size shows
up before any training starts.
"""

from mcdnn.descriptor import DescriptorError, describe, parse_descriptor

# %%
# The MNIST column: 29x29 input, two conv/pool stages, 150 hidden units.
mnist = parse_descriptor("1x29x29-20C4-MP2-40C5-MP3-150N-10N")
print(describe(mnist))

# %%
# The traffic-sign column uses 7x7 kernels on 48x48 colour images. The
# ``150MP2`` form names the map count of the pooled layer explicitly.
print()
print(describe(parse_descriptor("3x48x48-100C7-MP2-150C4-150MP2-250C4-250MP2-300N-43N")))

# %%
# Shapes must work out exactly. Here a 3x3 kernel leaves 5x5 maps that a
# 2x2 pooling layer cannot divide, and the parser names the culprit.
try:
    parse_descriptor("3x32x32-300C3-MP2-300C2-MP2-300C3-MP2-300C2-MP2-300N-100N-10N")
except DescriptorError as e:
    print("\nrejected:", e)
