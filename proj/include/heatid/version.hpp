#pragma once

#define HEATID_VERSION "0.1.0"
