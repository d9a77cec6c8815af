#include "slrkit/backbones.hpp"

#include <array>

#include "slrkit/errors.hpp"

namespace slrkit {

Architecture parse_architecture(const std::string& name) {
  if (name == "tiny") return Architecture::Tiny;
  if (name == "resnet50") return Architecture::ResNet50;
  if (name == "inceptionv3") return Architecture::InceptionV3;
  if (name == "xception") return Architecture::Xception;
  if (name == "vgg16") return Architecture::VGG16;
  throw ConfigError("unknown architecture '" + name +
                    "' (expected tiny, resnet50, inceptionv3, xception or vgg16)");
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::Tiny: return "tiny";
    case Architecture::ResNet50: return "resnet50";
    case Architecture::InceptionV3: return "inceptionv3";
    case Architecture::Xception: return "xception";
    case Architecture::VGG16: return "vgg16";
  }
  return "?";
}

namespace {

Graph build_tiny(int side) {
  Graph g;
  int x = g.add_input({side, side, 3});
  x = g.add_conv(x, 8, 5, 5, Padding::Valid, true, "stem_conv");
  x = g.add_relu(x, "stem_relu");
  x = g.add_avgpool(x, 5, 5, Padding::Valid, "stem_pool");
  return g;
}

Graph build_vgg16(int side) {
  Graph g;
  int x = g.add_input({side, side, 3});
  const std::array<std::array<int, 2>, 5> stages = {{{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}}};
  int block = 1;
  for (const auto& [filters, convs] : stages) {
    for (int c = 1; c <= convs; ++c) {
      const std::string name = "block" + std::to_string(block) + "_conv" + std::to_string(c);
      x = g.add_conv(x, filters, 3, 1, Padding::Same, true, name);
      x = g.add_relu(x, name + "_relu");
    }
    x = g.add_maxpool(x, 2, 2, Padding::Valid, "block" + std::to_string(block) + "_pool");
    ++block;
  }
  return g;
}

// Pre-activation bottleneck residual network (the v2 variant; its parameter
// count matches the counts this toolkit reproduces, see tests).
Graph build_resnet50(int side) {
  Graph g;
  int x = g.add_input({side, side, 3});
  x = g.add_zeropad(x, 3, 3, 3, 3, "conv1_pad");
  x = g.add_conv(x, 64, 7, 2, Padding::Valid, true, "conv1_conv");
  x = g.add_zeropad(x, 1, 1, 1, 1, "pool1_pad");
  x = g.add_maxpool(x, 3, 2, Padding::Valid, "pool1_pool");

  auto block = [&](int in, int filters, int stride, bool conv_shortcut,
                   const std::string& name) {
    int preact = g.add_batchnorm(in, name + "_preact_bn");
    preact = g.add_relu(preact, name + "_preact_relu");
    int shortcut;
    if (conv_shortcut) {
      shortcut = g.add_conv(preact, 4 * filters, 1, stride, Padding::Valid, true,
                            name + "_0_conv");
    } else if (stride > 1) {
      shortcut = g.add_maxpool(in, 1, stride, Padding::Valid, name + "_0_pool");
    } else {
      shortcut = in;
    }
    int y = g.add_conv(preact, filters, 1, 1, Padding::Valid, false, name + "_1_conv");
    y = g.add_batchnorm(y, name + "_1_bn");
    y = g.add_relu(y, name + "_1_relu");
    y = g.add_zeropad(y, 1, 1, 1, 1, name + "_2_pad");
    y = g.add_conv(y, filters, 3, stride, Padding::Valid, false, name + "_2_conv");
    y = g.add_batchnorm(y, name + "_2_bn");
    y = g.add_relu(y, name + "_2_relu");
    y = g.add_conv(y, 4 * filters, 1, 1, Padding::Valid, true, name + "_3_conv");
    return g.add_add({shortcut, y}, name + "_out");
  };

  auto stack = [&](int in, int filters, int blocks, int last_stride,
                   const std::string& name) {
    int y = block(in, filters, 1, true, name + "_block1");
    for (int b = 2; b < blocks; ++b) {
      y = block(y, filters, 1, false, name + "_block" + std::to_string(b));
    }
    return block(y, filters, last_stride, false, name + "_block" + std::to_string(blocks));
  };

  x = stack(x, 64, 3, 2, "conv2");
  x = stack(x, 128, 4, 2, "conv3");
  x = stack(x, 256, 6, 2, "conv4");
  x = stack(x, 512, 3, 1, "conv5");
  x = g.add_batchnorm(x, "post_bn");
  x = g.add_relu(x, "post_relu");
  return g;
}

Graph build_inceptionv3(int side) {
  Graph g;
  int counter = 0;
  auto conv_bn = [&](int in, int filters, int kh, int kw, int stride, Padding pad) {
    const std::string name = "conv2d_" + std::to_string(counter++);
    int y = g.add_conv(in, filters, kh, kw, stride, stride, pad, false, name);
    y = g.add_batchnorm(y, name + "_bn", /*scale=*/false);
    return g.add_relu(y, name + "_relu");
  };

  int x = g.add_input({side, side, 3});
  x = conv_bn(x, 32, 3, 3, 2, Padding::Valid);
  x = conv_bn(x, 32, 3, 3, 1, Padding::Valid);
  x = conv_bn(x, 64, 3, 3, 1, Padding::Same);
  x = g.add_maxpool(x, 3, 2, Padding::Valid, "pool1");
  x = conv_bn(x, 80, 1, 1, 1, Padding::Valid);
  x = conv_bn(x, 192, 3, 3, 1, Padding::Valid);
  x = g.add_maxpool(x, 3, 2, Padding::Valid, "pool2");

  // 35x35-style blocks (mixed0..2).
  for (int i = 0; i < 3; ++i) {
    const int pool_proj = (i == 0) ? 32 : 64;
    int b1 = conv_bn(x, 64, 1, 1, 1, Padding::Same);
    int b5 = conv_bn(x, 48, 1, 1, 1, Padding::Same);
    b5 = conv_bn(b5, 64, 5, 5, 1, Padding::Same);
    int b3 = conv_bn(x, 64, 1, 1, 1, Padding::Same);
    b3 = conv_bn(b3, 96, 3, 3, 1, Padding::Same);
    b3 = conv_bn(b3, 96, 3, 3, 1, Padding::Same);
    int bp = g.add_avgpool(x, 3, 1, Padding::Same, "mixed" + std::to_string(i) + "_pool");
    bp = conv_bn(bp, pool_proj, 1, 1, 1, Padding::Same);
    x = g.add_concat({b1, b5, b3, bp}, "mixed" + std::to_string(i));
  }

  // First grid reduction (mixed3).
  {
    int b3 = conv_bn(x, 384, 3, 3, 2, Padding::Valid);
    int bd = conv_bn(x, 64, 1, 1, 1, Padding::Same);
    bd = conv_bn(bd, 96, 3, 3, 1, Padding::Same);
    bd = conv_bn(bd, 96, 3, 3, 2, Padding::Valid);
    int bp = g.add_maxpool(x, 3, 2, Padding::Valid, "mixed3_pool");
    x = g.add_concat({b3, bd, bp}, "mixed3");
  }

  // 17x17-style factorized 7x7 blocks (mixed4..7).
  const std::array<int, 4> mids = {128, 160, 160, 192};
  for (int i = 0; i < 4; ++i) {
    const int c7 = mids[static_cast<std::size_t>(i)];
    const std::string mname = "mixed" + std::to_string(4 + i);
    int b1 = conv_bn(x, 192, 1, 1, 1, Padding::Same);
    int b7 = conv_bn(x, c7, 1, 1, 1, Padding::Same);
    b7 = conv_bn(b7, c7, 1, 7, 1, Padding::Same);
    b7 = conv_bn(b7, 192, 7, 1, 1, Padding::Same);
    int bd = conv_bn(x, c7, 1, 1, 1, Padding::Same);
    bd = conv_bn(bd, c7, 7, 1, 1, Padding::Same);
    bd = conv_bn(bd, c7, 1, 7, 1, Padding::Same);
    bd = conv_bn(bd, c7, 7, 1, 1, Padding::Same);
    bd = conv_bn(bd, 192, 1, 7, 1, Padding::Same);
    int bp = g.add_avgpool(x, 3, 1, Padding::Same, mname + "_pool");
    bp = conv_bn(bp, 192, 1, 1, 1, Padding::Same);
    x = g.add_concat({b1, b7, bd, bp}, mname);
  }

  // Second grid reduction (mixed8).
  {
    int b3 = conv_bn(x, 192, 1, 1, 1, Padding::Same);
    b3 = conv_bn(b3, 320, 3, 3, 2, Padding::Valid);
    int b7 = conv_bn(x, 192, 1, 1, 1, Padding::Same);
    b7 = conv_bn(b7, 192, 1, 7, 1, Padding::Same);
    b7 = conv_bn(b7, 192, 7, 1, 1, Padding::Same);
    b7 = conv_bn(b7, 192, 3, 3, 2, Padding::Valid);
    int bp = g.add_maxpool(x, 3, 2, Padding::Valid, "mixed8_pool");
    x = g.add_concat({b3, b7, bp}, "mixed8");
  }

  // Expanded-filter-bank blocks (mixed9, mixed10).
  for (int i = 0; i < 2; ++i) {
    const std::string mname = "mixed" + std::to_string(9 + i);
    int b1 = conv_bn(x, 320, 1, 1, 1, Padding::Same);
    int b3 = conv_bn(x, 384, 1, 1, 1, Padding::Same);
    int b3a = conv_bn(b3, 384, 1, 3, 1, Padding::Same);
    int b3b = conv_bn(b3, 384, 3, 1, 1, Padding::Same);
    int b3c = g.add_concat({b3a, b3b}, mname + "_a");
    int bd = conv_bn(x, 448, 1, 1, 1, Padding::Same);
    bd = conv_bn(bd, 384, 3, 3, 1, Padding::Same);
    int bda = conv_bn(bd, 384, 1, 3, 1, Padding::Same);
    int bdb = conv_bn(bd, 384, 3, 1, 1, Padding::Same);
    int bdc = g.add_concat({bda, bdb}, mname + "_b");
    int bp = g.add_avgpool(x, 3, 1, Padding::Same, mname + "_pool");
    bp = conv_bn(bp, 192, 1, 1, 1, Padding::Same);
    x = g.add_concat({b1, b3c, bdc, bp}, mname);
  }
  return g;
}

Graph build_xception(int side) {
  Graph g;
  int x = g.add_input({side, side, 3});

  auto conv_bn = [&](int in, int filters, int kernel, int stride, Padding pad,
                     const std::string& name) {
    int y = g.add_conv(in, filters, kernel, stride, pad, false, name);
    return g.add_batchnorm(y, name + "_bn");
  };
  auto sep_bn = [&](int in, int filters, const std::string& name) {
    int y = g.add_separable_conv(in, filters, 3, 1, Padding::Same, false, name);
    return g.add_batchnorm(y, name + "_bn");
  };

  x = conv_bn(x, 32, 3, 2, Padding::Valid, "block1_conv1");
  x = g.add_relu(x, "block1_conv1_act");
  x = conv_bn(x, 64, 3, 1, Padding::Valid, "block1_conv2");
  x = g.add_relu(x, "block1_conv2_act");

  // Entry-flow reduction blocks with strided 1x1 projection shortcuts.
  auto entry_block = [&](int in, int filters, bool leading_act, const std::string& name) {
    int shortcut = conv_bn(in, filters, 1, 2, Padding::Same, name + "_shortcut");
    int y = in;
    if (leading_act) y = g.add_relu(y, name + "_sepconv1_act");
    y = sep_bn(y, filters, name + "_sepconv1");
    y = g.add_relu(y, name + "_sepconv2_act");
    y = sep_bn(y, filters, name + "_sepconv2");
    y = g.add_maxpool(y, 3, 2, Padding::Same, name + "_pool");
    return g.add_add({y, shortcut}, name + "_out");
  };
  x = entry_block(x, 128, false, "block2");
  x = entry_block(x, 256, true, "block3");
  x = entry_block(x, 728, true, "block4");

  // Middle flow: eight identity residual blocks.
  for (int b = 5; b <= 12; ++b) {
    const std::string name = "block" + std::to_string(b);
    int y = x;
    for (int s = 1; s <= 3; ++s) {
      y = g.add_relu(y, name + "_sepconv" + std::to_string(s) + "_act");
      y = sep_bn(y, 728, name + "_sepconv" + std::to_string(s));
    }
    x = g.add_add({y, x}, name + "_out");
  }

  // Exit flow.
  {
    int shortcut = conv_bn(x, 1024, 1, 2, Padding::Same, "block13_shortcut");
    int y = g.add_relu(x, "block13_sepconv1_act");
    y = sep_bn(y, 728, "block13_sepconv1");
    y = g.add_relu(y, "block13_sepconv2_act");
    y = sep_bn(y, 1024, "block13_sepconv2");
    y = g.add_maxpool(y, 3, 2, Padding::Same, "block13_pool");
    x = g.add_add({y, shortcut}, "block13_out");
  }
  x = sep_bn(x, 1536, "block14_sepconv1");
  x = g.add_relu(x, "block14_sepconv1_act");
  x = sep_bn(x, 2048, "block14_sepconv2");
  x = g.add_relu(x, "block14_sepconv2_act");
  return g;
}

}  // namespace

Graph build_backbone_graph(Architecture arch, int side) {
  const int min_side = arch == Architecture::Tiny ? 25 : 32;
  if (side < min_side) {
    throw ConfigError("backbone input side must be >= " + std::to_string(min_side));
  }
  switch (arch) {
    case Architecture::Tiny: return build_tiny(side);
    case Architecture::ResNet50: return build_resnet50(side);
    case Architecture::InceptionV3: return build_inceptionv3(side);
    case Architecture::Xception: return build_xception(side);
    case Architecture::VGG16: return build_vgg16(side);
  }
  throw ConfigError("unhandled architecture");
}

}  // namespace slrkit
