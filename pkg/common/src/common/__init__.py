"""工作台各包共享的报告模型、配置基类与日志配置。"""
