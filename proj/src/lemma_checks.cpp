#include "platestruct/common.hpp"
