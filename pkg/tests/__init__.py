# 测试模块
