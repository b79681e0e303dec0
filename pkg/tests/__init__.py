"""
LLM Services 测试包

包含所有LLM服务相关的测试代码
"""
 
__version__ = "1.0.0" 