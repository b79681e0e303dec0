"""
单元测试包
 
包含所有Mock测试和单元测试
""" 